// Catch2 v3 amalgamated translation unit; provides main() for the unit suite.
#include <catch2/catch_amalgamated.cpp>
