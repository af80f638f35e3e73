#include "fxtqp/cli.hpp"

int main(int argc, char** argv) { return fxtqp::cli::main_entry(argc, argv); }
