#include <catch2/catch_amalgamated.hpp>

#include <toolgraph/toolgraph.hpp>
