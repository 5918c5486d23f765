#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mlia/dataset.hpp"
#include "mlia/error.hpp"
#include "mlia/grouping.hpp"

namespace mlia {

inline constexpr std::size_t kImageWidth = 25;
inline constexpr std::size_t kImageHeight = 20;
inline constexpr std::size_t kBlockSize = 5;
inline constexpr std::size_t kBlocksPerRow = kImageWidth / kBlockSize;  // 5 statements per block row
inline constexpr std::size_t kImageChannels = 3;

/// 25x20 grayscale raster, row-major. ES k (0-based) fills the 5x5 block at
/// block row k / 5, block column k % 5.
struct RatingImage {
    std::array<std::uint8_t, kImageWidth * kImageHeight> pixels{};

    std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * kImageWidth + col]; }

    friend bool operator==(const RatingImage&, const RatingImage&) = default;
};

/// Nearest byte for a rating in [0,1]; halves round up (0.5 -> 128).
inline std::uint8_t rating_to_byte(double rating) {
    if (!(rating >= 0.0 && rating <= 1.0)) throw DomainError("rating outside [0,1]");
    return static_cast<std::uint8_t>(std::floor(rating * 255.0 + 0.5 + 1e-9));
}

inline RatingImage encode_profile(const std::array<double, kStatementCount>& ratings) {
    RatingImage img;
    for (std::size_t k = 0; k < kStatementCount; ++k) {
        const std::uint8_t v = rating_to_byte(ratings[k]);
        const std::size_t top = (k / kBlocksPerRow) * kBlockSize;
        const std::size_t left = (k % kBlocksPerRow) * kBlockSize;
        for (std::size_t r = 0; r < kBlockSize; ++r)
            for (std::size_t c = 0; c < kBlockSize; ++c) img.pixels[(top + r) * kImageWidth + left + c] = v;
    }
    return img;
}

/// Inverse of encode_profile on the 0.1 rating grid. Reads the top-left pixel
/// of each block.
inline std::array<double, kStatementCount> decode_profile(const RatingImage& img) {
    std::array<double, kStatementCount> ratings{};
    for (std::size_t k = 0; k < kStatementCount; ++k) {
        const std::uint8_t v = img.at((k / kBlocksPerRow) * kBlockSize, (k % kBlocksPerRow) * kBlockSize);
        ratings[k] = std::round(v / 255.0 * kRawRatingMax) / kRawRatingMax;
    }
    return ratings;
}

inline bool is_block_constant(const RatingImage& img) {
    for (std::size_t k = 0; k < kStatementCount; ++k) {
        const std::size_t top = (k / kBlocksPerRow) * kBlockSize;
        const std::size_t left = (k % kBlocksPerRow) * kBlockSize;
        for (std::size_t r = 0; r < kBlockSize; ++r)
            for (std::size_t c = 0; c < kBlockSize; ++c)
                if (img.at(top + r, left + c) != img.at(top, left)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// PGM

inline std::string write_pgm(const RatingImage& img) {
    std::string out = "P5\n25 20\n255\n";
    out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
    return out;
}

/// Reads a binary PGM of exactly 25x20 with maxval 255. Header whitespace and
/// '#' comments are accepted.
inline RatingImage read_pgm(std::string_view bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        for (;;) {
            while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
                continue;
            }
            return;
        }
    };
    auto read_number = [&] {
        skip_space();
        std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos) throw ValidationError("malformed PGM header");
        return std::stoul(std::string(bytes.substr(start, pos - start)));
    };
    if (bytes.substr(0, 2) != "P5") throw ValidationError("not a binary PGM (P5)");
    pos = 2;
    const auto w = read_number(), h = read_number(), maxval = read_number();
    if (w != kImageWidth || h != kImageHeight) throw ShapeMismatch("PGM must be 25x20");
    if (maxval != 255) throw ValidationError("PGM maxval must be 255");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw ValidationError("malformed PGM header");
    ++pos;
    RatingImage img;
    if (bytes.size() - pos != img.pixels.size()) throw ValidationError("PGM payload must be 500 bytes");
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), img.pixels.begin());
    return img;
}

// ---------------------------------------------------------------------------
// Network input

/// Pixel value as the network's rescale stage sees it. The expression is the
/// one the rescale layer evaluates, so both routes are bit-identical.
inline double rescale_byte(double byte_value) { return byte_value * (1.0 / 255.0); }

/// (20, 25, 3) tensor, channel-last, values in [0,1].
inline std::vector<double> to_network_input(const RatingImage& img) {
    std::vector<double> out(img.pixels.size() * kImageChannels);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        for (std::size_t c = 0; c < kImageChannels; ++c) out[i * kImageChannels + c] = rescale_byte(img.pixels[i]);
    return out;
}

/// (20, 25, 3) raw byte values replicated over channels; fed to networks that
/// start with the rescale layer.
inline std::vector<double> to_raw_input(const RatingImage& img) {
    std::vector<double> out(img.pixels.size() * kImageChannels);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        for (std::size_t c = 0; c < kImageChannels; ++c) out[i * kImageChannels + c] = img.pixels[i];
    return out;
}

// ---------------------------------------------------------------------------
// Labeled sets

struct LabeledImageSet {
    std::vector<std::string> ids;
    std::vector<RatingImage> images;
    std::vector<int> labels;
    std::size_t arity = 2;
    std::string grouping;  // e.g. "BQ1, two groups"

    std::size_t size() const noexcept { return images.size(); }

    std::vector<std::size_t> label_counts() const {
        std::vector<std::size_t> counts(arity, 0);
        for (int l : labels) ++counts[static_cast<std::size_t>(l)];
        return counts;
    }
};

inline LabeledImageSet make_image_set(const Cohort& cohort, const Grouping& g) {
    if (g.labels.size() != cohort.size()) throw ShapeMismatch("grouping does not match cohort");
    LabeledImageSet set;
    set.arity = g.arity();
    set.grouping = g.name();
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        set.ids.push_back(cohort.respondents[i].id);
        set.images.push_back(encode_profile(cohort.respondents[i].ratings));
        set.labels.push_back(g.labels[i]);
    }
    return set;
}

/// One subdirectory per label ("0", "1", ...) holding <id>.pgm files.
inline void write_image_set(const LabeledImageSet& set, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    for (std::size_t k = 0; k < set.arity; ++k) {
        const fs::path sub = dir / std::to_string(k);
        fs::create_directories(sub);
        for (const auto& entry : fs::directory_iterator(sub))
            if (entry.path().extension() == ".pgm") fs::remove(entry.path());
    }
    for (std::size_t i = 0; i < set.size(); ++i) {
        const fs::path file = dir / std::to_string(set.labels[i]) / (set.ids[i] + ".pgm");
        std::ofstream out(file, std::ios::binary);
        if (!out) throw Error("cannot write '" + file.string() + "'");
        const auto bytes = write_pgm(set.images[i]);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
}

/// Reads a label-by-directory image set. Label directories must be named
/// 0..k-1; files are taken in name order so the result is deterministic.
inline LabeledImageSet read_image_set(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ValidationError("'" + dir.string() + "' is not a directory");
    std::size_t arity = 0;
    while (fs::is_directory(dir / std::to_string(arity))) ++arity;
    if (arity < 2) throw ValidationError("image set needs label directories 0 and 1");

    LabeledImageSet set;
    set.arity = arity;
    set.grouping = dir.filename().string();
    for (std::size_t k = 0; k < arity; ++k) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir / std::to_string(k)))
            if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::ifstream in(f, std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            set.ids.push_back(f.stem().string());
            set.images.push_back(read_pgm(buf.str()));
            set.labels.push_back(static_cast<int>(k));
        }
    }
    return set;
}

}  // namespace mlia
