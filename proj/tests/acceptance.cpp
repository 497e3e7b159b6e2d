#include "caustic/grid.hpp"
int main(){return 0;}
