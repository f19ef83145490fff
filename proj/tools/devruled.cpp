#include "devruled/cli.hpp"

int main(int argc, char** argv) { return devruled::run_cli({argv + 1, argv + argc}); }
