#include <iostream>

int main() {
  std::cout << "rads: CLI wiring pending\n";
  return 0;
}
