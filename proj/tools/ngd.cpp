#include "ngd/app/cli.hpp"

int main(int argc, char** argv) { return ngd::app::run_command(argc, argv); }
