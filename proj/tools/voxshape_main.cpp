#include <cstdio>

int main() {
    std::puts("voxshape: commands not wired yet");
    return 0;
}
