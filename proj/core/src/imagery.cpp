#include "ecoperceiver/imagery.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace ecp {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'I', 'M'};
constexpr uint32_t kVersion = 1;
constexpr size_t kPixelsPerDay = static_cast<size_t>(kBandChannels * kBandEdge * kBandEdge);

template <class T>
void put(std::ofstream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError(path + ": truncated imagery container");
    return v;
}

}  // namespace

const DayImage* ImageryStack::find(int64_t epoch_day) const {
    int64_t lo = 0, hi = static_cast<int64_t>(days.size()) - 1;
    while (lo <= hi) {
        const int64_t mid = (lo + hi) / 2;
        if (days[static_cast<size_t>(mid)].epoch_day == epoch_day) return &days[static_cast<size_t>(mid)];
        if (days[static_cast<size_t>(mid)].epoch_day < epoch_day)
            lo = mid + 1;
        else
            hi = mid - 1;
    }
    return nullptr;
}

void ImageryStack::validate() const {
    for (size_t i = 0; i < days.size(); ++i) {
        const auto& d = days[i];
        if (d.pixels.size() != kPixelsPerDay || d.present.size() != kPixelsPerDay)
            throw ContractError("imagery: day " + std::to_string(d.epoch_day) + " has " +
                                std::to_string(d.pixels.size()) + " pixels, expected " +
                                std::to_string(kPixelsPerDay));
        if (i > 0 && days[i - 1].epoch_day >= d.epoch_day)
            throw ContractError("imagery: days not strictly ascending");
    }
}

void write_imagery(const std::string& path, const ImageryStack& stack) {
    stack.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 4);
    put<uint32_t>(out, kVersion);
    put<uint32_t>(out, static_cast<uint32_t>(stack.days.size()));
    put<uint16_t>(out, static_cast<uint16_t>(kBandChannels));
    put<uint16_t>(out, static_cast<uint16_t>(kBandEdge));
    put<uint16_t>(out, static_cast<uint16_t>(kBandEdge));
    for (const auto& day : stack.days) {
        put<int64_t>(out, day.epoch_day);
        for (size_t p = 0; p < kPixelsPerDay; ++p) {
            const float v =
                day.present[p] ? day.pixels[p] : std::numeric_limits<float>::quiet_NaN();
            put<float>(out, v);
        }
    }
    if (!out) throw IoError("short write to " + path);
}

ImageryStack read_imagery(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path + ": bad magic, not a CSIM container");
    const auto version = get<uint32_t>(in, path);
    if (version != kVersion)
        throw FormatError(path + ": unsupported CSIM version " + std::to_string(version));
    const auto n_days = get<uint32_t>(in, path);
    const auto channels = get<uint16_t>(in, path);
    const auto height = get<uint16_t>(in, path);
    const auto width = get<uint16_t>(in, path);
    if (channels != kBandChannels || height != kBandEdge || width != kBandEdge)
        throw FormatError(path + ": geometry " + std::to_string(channels) + "x" +
                          std::to_string(height) + "x" + std::to_string(width) + ", expected 9x8x8");

    ImageryStack stack;
    stack.days.resize(n_days);
    for (auto& day : stack.days) {
        day.epoch_day = get<int64_t>(in, path);
        day.pixels.resize(kPixelsPerDay);
        day.present.assign(kPixelsPerDay, 0);
        in.read(reinterpret_cast<char*>(day.pixels.data()),
                static_cast<std::streamsize>(kPixelsPerDay * sizeof(float)));
        if (!in) throw FormatError(path + ": truncated imagery payload");
        for (size_t p = 0; p < kPixelsPerDay; ++p) {
            if (std::isnan(day.pixels[p])) {
                day.pixels[p] = 0.0f;  // flags carry missingness from here on
            } else {
                day.present[p] = 1;
            }
        }
    }
    char extra;
    if (in.read(&extra, 1)) throw FormatError(path + ": trailing bytes after payload");
    stack.validate();
    return stack;
}

}  // namespace ecp
