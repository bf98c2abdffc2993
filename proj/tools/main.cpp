#include "priorseg/cli.hpp"

int main(int argc, char** argv)
{
    return priorseg::run_cli(argc, argv);
}
