#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecoperceiver/catalog.hpp"
#include "ecoperceiver/errors.hpp"

namespace ecp {

// One day's 9x8x8 image. Pixels are stored value+flag in memory; the quiet
// NaN sentinel exists only inside the on-disk container.
struct DayImage {
    int64_t epoch_day = 0;
    std::vector<float> pixels;     // (9, 8, 8) row-major
    std::vector<uint8_t> present;  // same layout
};

struct ImageryStack {
    std::string site_id;
    std::vector<DayImage> days;  // ascending epoch_day, unique

    const DayImage* find(int64_t epoch_day) const;
    void validate() const;
};

// Container format "CSIM" v1, little-endian:
//   magic 'CSIM' | u32 version=1 | u32 n_days | u16 channels=9 | u16 height=8
//   | u16 width=8 | per day: i64 epoch_day, 9*8*8 f32 (quiet NaN = missing).
// The NaN sentinel is decoded to presence flags immediately on load.
void write_imagery(const std::string& path, const ImageryStack& stack);
ImageryStack read_imagery(const std::string& path);

inline constexpr size_t kImageryHeaderBytes = 18;

}  // namespace ecp
