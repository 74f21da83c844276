#include "dmdt/cli/app.hpp"

int main(int argc, char** argv) { return dmdt::cli::run(argc, argv); }
