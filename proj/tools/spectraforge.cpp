#include "spectraforge/cli.hpp"

int main(int argc, char** argv) { return spectraforge::dispatch(argc, argv); }
