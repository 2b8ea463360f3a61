#include <cstdio>

int main() {
  std::puts("streamforge: pipeline driver (stages land with the pipeline module)");
  return 0;
}
