#include "commands.h"

int main(int argc, char** argv) { return superglobal::cli::run(argc, argv); }
