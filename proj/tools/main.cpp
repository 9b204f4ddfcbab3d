#include "cli.hpp"

int main(int argc, char** argv) { return gridfuse::run_cli(argc, argv); }
