#include <cstdio>

int main() {
  std::puts("fabsim CLI placeholder");
  return 0;
}
