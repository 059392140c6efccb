#include "opreward/cli.hpp"

int main(int argc, char** argv) { return opreward::cli_dispatch(argc, argv); }
