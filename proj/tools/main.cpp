#include "stellarcert/cli_app.hpp"

int main(int argc, char** argv) { return stellarcert::run_cli(argc, argv); }
