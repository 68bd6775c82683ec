#include "ild/cli.hpp"

int main(int argc, char** argv) { return ild::parse_and_dispatch(argc, argv); }
