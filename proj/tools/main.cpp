#include "tpr/cli.hpp"

int main(int argc, char** argv) { return tpr::cli_dispatch(argc, argv); }
