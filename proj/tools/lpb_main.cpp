#include "lpb/lpb.hpp"
int main(){return 0;}
