#include "gramridge/cli.hpp"

int main(int argc, char** argv) { return gramridge::run_command(argc, argv); }
