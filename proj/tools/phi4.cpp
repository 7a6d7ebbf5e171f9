#include "phi4/cli.hpp"

int main(int argc, char** argv)
{
    return phi4::cli::run(argc, argv);
}
