#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "aoff/parallel.hpp"

int main(int argc, char** argv) {
    aoff::set_num_threads(1);  // bitwise-reproducible reductions
    doctest::Context ctx(argc, argv);
    return ctx.run();
}
