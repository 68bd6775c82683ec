#include "ild/detect.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ild/mathx.hpp"
#include "ild/parallel.hpp"
#include "ild/rng.hpp"
#include "ild/splits.hpp"

namespace ild {

const std::vector<std::string> kIldApproaches = {
    "mid-point",  "log-loss",     "cal-log-loss",
    "gmm",        "mine",         "pc-softmax",
    "ptt-majority", "fet-mean",   "fet-median"};

void IldConfig::validate() const {
  if (std::find(kIldApproaches.begin(), kIldApproaches.end(), approach) ==
      kIldApproaches.end())
    throw std::invalid_argument("ild: unknown approach '" + approach + "'");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("ild: alpha must lie in (0, 1)");
  if (top_j < 1) throw std::invalid_argument("ild: top_j must be >= 1");
  if (outer_folds < 2)
    throw std::invalid_argument("ild: outer_folds must be >= 2");
  if (hpo_budget < 1)
    throw std::invalid_argument("ild: hpo_budget must be >= 1");
  if (inner_repeats < 1)
    throw std::invalid_argument("ild: inner_repeats must be >= 1");
  if (!(inner_fraction > 0.0 && inner_fraction < 1.0))
    throw std::invalid_argument("ild: inner_fraction must lie in (0, 1)");
  if (mine_epochs < 1 || mine_patience < 1)
    throw std::invalid_argument("ild: mine epochs and patience must be >= 1");
  if (threads < 1) throw std::invalid_argument("ild: threads must be >= 1");
}

namespace {

// approaches sharing one search + fold pass are grouped; the classifier group
// derives all its statistics from the same plain refits
enum class Group { classifier, gmm, mine, pc };

Group group_of(const std::string& approach) {
  if (approach == "gmm") return Group::gmm;
  if (approach == "mine") return Group::mine;
  if (approach == "pc-softmax") return Group::pc;
  return Group::classifier;
}

MineHyper mine_hyper_from_json(const nlohmann::json& hp,
                               const IldConfig& cfg) {
  MineHyper mh;
  mh.hidden_layers = hp.value("hidden_layers", 1);
  mh.units = hp.value("units", 32);
  mh.learning_rate = hp.value("learning_rate", 1e-3);
  mh.l2 = hp.value("l2", 0.0);
  mh.epochs = cfg.mine_epochs;
  mh.patience = cfg.mine_patience;
  mh.ensemble = 1;
  return mh;
}

std::vector<ModelCandidate> search_candidates(Group g, const Dataset& ds,
                                              const IldConfig& cfg,
                                              std::uint64_t seed) {
  const SplitPlan plan{SplitPlan::Kind::monte_carlo_cv, cfg.inner_repeats,
                       cfg.inner_fraction, derive_seed(seed, 0x4b0)};
  switch (g) {
    case Group::classifier: {
      // one shared-objective search per family; the merged ranking lets the
      // top-J span the whole portfolio
      const int nf = static_cast<int>(kPortfolioFamilies.size());
      std::vector<ModelCandidate> merged;
      std::string first_error;
      for (int f = 0; f < nf; ++f) {
        const int share =
            cfg.hpo_budget / nf + (f < cfg.hpo_budget % nf ? 1 : 0);
        if (share == 0) continue;
        try {
          auto part = random_search(ds, kPortfolioFamilies[f], cfg.ranges,
                                    share, Objective::ber, plan,
                                    derive_seed(seed, 0xcafe, f), nullptr,
                                    cfg.threads);
          merged.insert(merged.end(), part.begin(), part.end());
        } catch (const std::exception& e) {
          if (first_error.empty()) first_error = e.what();
        }
      }
      if (merged.empty())
        throw std::runtime_error("ild: the search produced no candidates; " +
                                 first_error);
      std::stable_sort(merged.begin(), merged.end(),
                       [](const ModelCandidate& a, const ModelCandidate& b) {
                         return a.score < b.score;
                       });
      for (size_t i = 0; i < merged.size(); ++i)
        merged[i].rank = static_cast<int>(i);
      return merged;
    }
    case Group::gmm:
      return random_search(ds, "gmm-bayes", cfg.ranges, cfg.hpo_budget,
                           Objective::aic, plan, derive_seed(seed, 0xcafe, 9),
                           nullptr, cfg.threads);
    case Group::mine: {
      // the statistics network shares the net sampling windows; candidates
      // are ranked by the spread of their split estimates
      const CandidateScorer scorer =
          [&cfg](const Dataset& tr, const Dataset& va, const nlohmann::json& hp,
                 std::uint64_t fit_seed) {
            return mine_holdout_bits(tr, va, mine_hyper_from_json(hp, cfg),
                                     fit_seed);
          };
      auto out = random_search(ds, "softmax-net", cfg.ranges, cfg.hpo_budget,
                               Objective::mse_proxy, plan,
                               derive_seed(seed, 0xcafe, 10), scorer,
                               cfg.threads);
      for (auto& c : out) {
        c.family = "mine";
        c.hp.erase("optimizer");
        c.hp.erase("batch_size");
        c.hp["epochs"] = cfg.mine_epochs;
        c.hp["patience"] = cfg.mine_patience;
      }
      return out;
    }
    case Group::pc: {
      auto out = random_search(ds, "pc-softmax-net", cfg.ranges,
                               cfg.hpo_budget, Objective::ber, plan,
                               derive_seed(seed, 0xcafe, 11), nullptr,
                               cfg.threads);
      // the normalizer does not move the search objective, so it is pinned
      // after selection
      for (auto& c : out)
        c.hp["pc_norm"] = cfg.pc_norm == PcNorm::scaled_exp ? "scaled_exp"
                                                            : "weighted_sum";
      return out;
    }
  }
  throw std::logic_error("ild: unreachable group");
}

struct FoldData {
  Dataset train;
  Dataset test;
};

// per-candidate fold statistics; the classifier group fills everything but
// `est`, the estimator groups fill only `est`
struct FoldColumns {
  std::string error;
  std::vector<double> logloss, cal, mid, acc, fet, est;
};

struct GroupResult {
  std::vector<ModelCandidate> selected;
  std::vector<FoldColumns> cols;
  std::vector<double> acc_mc;  // per-fold marginal-predictor accuracy
  bool search_reduced = false;
};

GroupResult run_group(Group g, const Dataset& ds,
                      const std::vector<FoldData>& folds, bool need_cal,
                      const IldConfig& cfg, std::uint64_t seed) {
  auto all = search_candidates(g, ds, cfg, seed);
  const int jsel = std::min<int>(cfg.top_j, static_cast<int>(all.size()));
  const int K = static_cast<int>(folds.size());

  GroupResult res;
  res.selected.assign(all.begin(), all.begin() + jsel);
  res.search_reduced = jsel < cfg.top_j;
  res.cols.resize(jsel);
  for (auto& c : res.cols) {
    c.logloss.resize(K);
    c.cal.resize(K);
    c.mid.resize(K);
    c.acc.resize(K);
    c.fet.resize(K);
    c.est.resize(K);
  }

  std::vector<Eigen::VectorXd> marg(K);
  res.acc_mc.resize(K);
  for (int k = 0; k < K; ++k) {
    marg[k] = class_marginal(folds[k].train);
    if (g == Group::classifier) {
      const auto mp = fit_marginal_predictor(folds[k].train);
      const auto cm = confusion_matrix(
          folds[k].test.y, mp->predict(folds[k].test.x), ds.num_classes);
      res.acc_mc[k] = classification_metrics(cm).accuracy;
    }
  }

  std::vector<std::string> errs(static_cast<size_t>(jsel) * K);
  parallel_for(jsel * K, cfg.threads, [&](int idx) {
    const int j = idx / K;
    const int k = idx % K;
    const Dataset& tr = folds[k].train;
    const Dataset& te = folds[k].test;
    const ModelCandidate& cand = res.selected[j];
    FoldColumns& col = res.cols[j];
    const int m = ds.num_classes;
    try {
      if (g == Group::classifier) {
        auto clf =
            make_classifier(cand.family, cand.hp, derive_seed(seed, 0xf0, j, k));
        clf->fit(tr);
        const Eigen::MatrixXd probs = clf->predict_proba(te.x);
        const std::vector<int> pred = argmax_rows(probs);
        const ConfusionMatrix cm = confusion_matrix(te.y, pred, m);
        const double acc = classification_metrics(cm).accuracy;
        col.acc[k] = acc;
        col.logloss[k] =
            mi_logloss(probs, te.y, marg[k], cfg.logloss_form).value;
        const double err = std::min(1.0 - acc, (m - 1.0) / m);
        col.mid[k] = mi_midpoint(err, marg[k], m).value;
        col.fet[k] =
            fisher_exact(m > 2 ? binarize_cm(cm, 1) : cm).p_value;
        if (need_cal) {
          const auto sub = mccv_splits(tr.y, m, 1, cfg.inner_fraction,
                                       derive_seed(seed, 0xca1b, j, k))[0];
          const Dataset sub_tr = tr.subset(sub.train);
          const Dataset sub_va = tr.subset(sub.test);
          auto held = make_classifier(cand.family, cand.hp,
                                      derive_seed(seed, 0xf1, j, k));
          held->fit(sub_tr);
          const Calibrator calib = fit_calibrator(
              cfg.calibration, held->predict_proba(sub_va.x), sub_va.y);
          const Eigen::MatrixXd cp =
              apply_calibrator(calib, held->predict_proba(te.x));
          col.cal[k] = mi_logloss(cp, te.y, marg[k], cfg.logloss_form).value;
        }
      } else if (g == Group::gmm) {
        auto clf = make_classifier("gmm-bayes", cand.hp,
                                   derive_seed(seed, 0xf2, j, k));
        clf->fit(tr);
        col.est[k] = gmm_density_ratio_bits(
            dynamic_cast<const GmmBayesClassifier&>(*clf), te);
      } else if (g == Group::mine) {
        col.est[k] = mine_holdout_bits(tr, te, mine_hyper_from_json(cand.hp, cfg),
                                       derive_seed(seed, 0xf3, j, k));
      } else {
        auto clf = make_classifier("pc-softmax-net", cand.hp,
                                   derive_seed(seed, 0xf4, j, k));
        clf->fit(tr);
        col.est[k] = pc_softmax_score_bits(
            dynamic_cast<const NetClassifier&>(*clf).net(), te.x, te.y);
      }
    } catch (const std::exception& e) {
      errs[idx] = cand.family + " fold " + std::to_string(k) + ": " +
                  (e.what()[0] ? e.what() : "refit failed");
    }
  });

  for (int j = 0; j < jsel; ++j)
    for (int k = 0; k < K; ++k)
      if (!errs[static_cast<size_t>(j) * K + k].empty()) {
        res.cols[j].error = errs[static_cast<size_t>(j) * K + k];
        break;
      }
  return res;
}

DetectionReport assemble(const std::string& approach, const GroupResult& gr,
                         const IldConfig& cfg, std::uint64_t seed) {
  DetectionReport rep;
  rep.approach = approach;
  rep.alpha = cfg.alpha;
  rep.top_j_requested = cfg.top_j;
  rep.seed = seed;

  std::vector<double> pvals;
  for (size_t j = 0; j < gr.selected.size(); ++j) {
    if (!gr.cols[j].error.empty()) {
      rep.dropped.push_back(gr.cols[j].error);
      continue;
    }
    const FoldColumns& col = gr.cols[j];
    CandidateOutcome co;
    co.family = gr.selected[j].family;
    co.hp = gr.selected[j].hp;
    co.validation_score = gr.selected[j].score;
    if (approach == "mid-point") {
      co.fold_estimates = col.mid;
      co.test = ott_pvalue(col.mid, 0.0);
    } else if (approach == "log-loss") {
      co.fold_estimates = col.logloss;
      co.test = ott_pvalue(col.logloss, 0.0);
    } else if (approach == "cal-log-loss") {
      co.fold_estimates = col.cal;
      co.test = ott_pvalue(col.cal, 0.0);
    } else if (approach == "ptt-majority") {
      co.fold_estimates = col.acc;
      co.fold_baselines = gr.acc_mc;
      co.test = corrected_paired_ttest(col.acc, gr.acc_mc);
    } else if (approach == "fet-mean" || approach == "fet-median") {
      co.fold_estimates = col.fet;
      const double p = aggregate_pvalues(
          col.fet,
          approach == "fet-mean" ? AggMode::mean : AggMode::median);
      co.test = TestResult{p, p, approach, false};
    } else {
      co.fold_estimates = col.est;
      co.test = ott_pvalue(col.est, 0.0);
    }
    pvals.push_back(co.test.p_value);
    rep.candidates.push_back(std::move(co));
  }
  if (pvals.empty())
    throw std::runtime_error("ild: every candidate failed in the outer folds");

  rep.top_j_effective = static_cast<int>(pvals.size());
  rep.reduced_candidates =
      gr.search_reduced || rep.top_j_effective < cfg.top_j;
  rep.threshold = std::max(1, rep.top_j_effective / 2);
  rep.holm = holm_bonferroni(pvals, cfg.alpha);
  rep.tau = rep.holm.tau;
  for (size_t i = 0; i < rep.candidates.size(); ++i)
    rep.candidates[i].rejected = rep.holm.rejected[i];
  rep.leak = rep.tau >= rep.threshold;
  return rep;
}

}  // namespace

std::vector<DetectionReport> run_ild_multi(
    const Dataset& ds, const IldConfig& cfg,
    const std::vector<std::string>& approaches, std::uint64_t seed) {
  if (approaches.empty())
    throw std::invalid_argument("ild: no approaches requested");
  for (const auto& a : approaches) {
    IldConfig probe = cfg;
    probe.approach = a;
    probe.validate();
  }
  if (ds.num_classes < 2)
    throw std::invalid_argument("ild: need at least two classes");

  const auto t0 = std::chrono::steady_clock::now();
  const auto idx = stratified_kfold(ds.y, ds.num_classes, cfg.outer_folds,
                                    derive_seed(seed, 0xf01d));
  std::vector<FoldData> folds(idx.size());
  for (size_t k = 0; k < idx.size(); ++k)
    folds[k] = {ds.subset(idx[k].train), ds.subset(idx[k].test)};

  const bool need_cal =
      std::find(approaches.begin(), approaches.end(), "cal-log-loss") !=
      approaches.end();

  // run each needed group once, in a fixed order
  std::vector<std::pair<Group, GroupResult>> groups;
  for (Group g : {Group::classifier, Group::gmm, Group::mine, Group::pc}) {
    const bool wanted =
        std::any_of(approaches.begin(), approaches.end(),
                    [g](const std::string& a) { return group_of(a) == g; });
    if (wanted)
      groups.emplace_back(g, run_group(g, ds, folds, need_cal, cfg, seed));
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  std::vector<DetectionReport> out;
  out.reserve(approaches.size());
  for (const auto& a : approaches) {
    const Group g = group_of(a);
    const auto it =
        std::find_if(groups.begin(), groups.end(),
                     [g](const auto& p) { return p.first == g; });
    DetectionReport rep = assemble(a, it->second, cfg, seed);
    rep.seconds = elapsed;
    out.push_back(std::move(rep));
  }
  return out;
}

DetectionReport run_ild(const Dataset& ds, const IldConfig& cfg,
                        std::uint64_t seed) {
  return run_ild_multi(ds, cfg, {cfg.approach}, seed)[0];
}

nlohmann::json DetectionReport::to_json() const {
  nlohmann::json j;
  j["approach"] = approach;
  j["alpha"] = alpha;
  j["top_j_requested"] = top_j_requested;
  j["top_j_effective"] = top_j_effective;
  j["threshold"] = threshold;
  j["tau"] = tau;
  j["decision"] = leak ? "leak" : "no-leak";
  j["reduced_candidates"] = reduced_candidates;
  if (!dropped.empty()) j["dropped"] = dropped;
  j["seed"] = seed;
  j["seconds"] = seconds;
  j["holm"] = {{"tau", holm.tau},
               {"sorted_p", holm.sorted_p},
               {"thresholds", holm.thresholds}};
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : candidates) {
    nlohmann::json cj;
    cj["family"] = c.family;
    cj["hp"] = c.hp;
    cj["validation_score"] = c.validation_score;
    cj["fold_estimates"] = c.fold_estimates;
    if (!c.fold_baselines.empty()) cj["fold_baselines"] = c.fold_baselines;
    cj["p_value"] = c.test.p_value;
    cj["statistic"] = c.test.statistic;
    cj["test"] = c.test.test;
    cj["degenerate"] = c.test.degenerate;
    cj["rejected"] = c.rejected;
    j["candidates"].push_back(std::move(cj));
  }
  return j;
}

IldMetrics ild_metrics(const std::vector<bool>& truth,
                       const std::vector<bool>& predicted) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("ild metrics: size mismatch");
  int tp = 0, tn = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] && predicted[i]) ++tp;
    else if (truth[i]) ++fn;
    else if (predicted[i]) ++fp;
    else ++tn;
  }
  IldMetrics m;
  const int pos = tp + fn, neg = tn + fp;
  m.accuracy = truth.empty() ? 0.0
                             : static_cast<double>(tp + tn) /
                                   static_cast<double>(truth.size());
  m.fpr = neg > 0 ? static_cast<double>(fp) / neg : 0.0;
  m.fnr = pos > 0 ? static_cast<double>(fn) / pos : 0.0;
  return m;
}

IldEvaluation evaluate_ild(const std::vector<IldSystem>& systems,
                           const IldConfig& cfg, std::uint64_t seed) {
  IldEvaluation ev;
  ev.reports.resize(systems.size());
  ev.errors.resize(systems.size());
  std::vector<bool> truth, pred;
  for (size_t i = 0; i < systems.size(); ++i) {
    try {
      ev.reports[i] = run_ild(systems[i].data, cfg, derive_seed(seed, 0x515, i));
      truth.push_back(systems[i].leaky);
      pred.push_back(ev.reports[i].leak);
    } catch (const std::exception& e) {
      ev.errors[i] = e.what()[0] ? e.what() : "detection failed";
    }
  }
  ev.metrics = ild_metrics(truth, pred);
  return ev;
}

double nmae(const std::vector<double>& truth,
            const std::vector<double>& estimate, double h_y) {
  if (!(h_y > 0.0))
    throw std::invalid_argument("nmae: label entropy must be positive");
  if (truth.size() != estimate.size() || truth.empty())
    throw std::invalid_argument("nmae: need matching nonempty vectors");
  double acc = 0.0;
  for (size_t i = 0; i < truth.size(); ++i)
    acc += std::abs(truth[i] - estimate[i]);
  return acc / (h_y * static_cast<double>(truth.size()));
}

}  // namespace ild
