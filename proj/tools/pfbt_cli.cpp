#include "pfbt/app.hpp"

int main(int argc, char** argv) { return pfbt::app::run_cli(argc, argv); }
