#include "vitaudit/cli.hpp"

int main(int argc, char** argv) { return vitaudit::run_cli(argc, argv); }
