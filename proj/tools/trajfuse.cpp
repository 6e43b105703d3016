#include "trajfuse/cli.hpp"

int main(int argc, char** argv) { return trajfuse::cli::run(argc, argv); }
