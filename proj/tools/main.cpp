#include "sct/commands.hpp"

int main(int argc, char** argv) { return sct::cli_main(argc, argv); }
