#include <cstdint>
#include <cstddef>
#include <cstring>

int numberOfOperations(int);
int numberOfOperations_opt(int);

extern "C" int LLVMFuzzerTestOneInput(const uint8_t* data, size_t size) {
    if (size < 4) return 0;

    int32_t in32;
    std::memcpy(&in32, data, 4);
    int arg = static_cast<int>(in32);

    int r_base = numberOfOperations(arg);
    int r_opt  = numberOfOperations_opt(arg);

    if (r_base != r_opt) {
        __builtin_trap();
    }

    return 0;
}
