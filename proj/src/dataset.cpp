#include "prunekit/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "prunekit/rng.hpp"

namespace prunekit {

namespace {

constexpr char kMagic[4] = {'P', 'K', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    check(is.gcount() == 4, "dataset file truncated while reading " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

Dataset synth_dataset(int classes, int per_class, int c, int h, int w, std::uint32_t seed,
                      float noise) {
    check(classes >= 2, "synthetic dataset needs at least 2 classes");
    check(classes <= 256, "synthetic dataset supports at most 256 classes");
    check(per_class >= 1, "synthetic dataset needs at least 1 sample per class");
    check(c >= 1 && h >= 1 && w >= 1, "synthetic dataset dims must be positive");
    check(noise >= 0.0f, "synthetic dataset noise must be >= 0");

    const int count = classes * per_class;
    Dataset ds;
    ds.classes = classes;
    ds.images = Tensor(count, c, h, w);
    ds.labels.resize(count);

    // per-class per-channel brightness, equally spaced so the channel means
    // alone separate the classes
    std::vector<float> base(static_cast<std::size_t>(classes) * c);
    for (int k = 0; k < classes; ++k)
        for (int ch = 0; ch < c; ++ch)
            base[static_cast<std::size_t>(k) * c + ch] =
                0.2f + 0.6f * (((k + ch) % classes) / static_cast<float>(classes - 1));

    const int patch = std::max(2, std::min(h, w) / 3);
    std::mt19937 gen(seed);
    int idx = 0;
    for (int k = 0; k < classes; ++k) {
        const int py = (h - patch <= 0) ? 0 : (k * 3) % (h - patch + 1);
        const int px = (w - patch <= 0) ? 0 : (k * 5) % (w - patch + 1);
        for (int s = 0; s < per_class; ++s, ++idx) {
            ds.labels[idx] = k;
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        float v = base[static_cast<std::size_t>(k) * c + ch];
                        if (y >= py && y < py + patch && x >= px && x < px + patch)
                            v += (k % 2 == 0) ? 0.15f : -0.15f;
                        v += uniform_float(gen, -noise, noise);
                        ds.images.at(idx, ch, y, x) = std::clamp(v, 0.0f, 1.0f);
                    }
        }
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    check(ds.classes >= 2 && ds.classes <= 256,
          "dataset classes must be in [2,256] to save, got " + std::to_string(ds.classes));
    check(ds.count() == ds.images.n, "dataset image/label counts differ");
    for (int lab : ds.labels)
        check(lab >= 0 && lab < ds.classes, "dataset label " + std::to_string(lab) +
                                                " out of range");
    std::ofstream os(path, std::ios::binary);
    check(os.good(), "cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(ds.count()));
    put_u32(os, static_cast<std::uint32_t>(ds.images.c));
    put_u32(os, static_cast<std::uint32_t>(ds.images.h));
    put_u32(os, static_cast<std::uint32_t>(ds.images.w));
    put_u32(os, static_cast<std::uint32_t>(ds.classes));
    std::vector<unsigned char> buf(ds.images.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
        const float v = std::clamp(ds.images.data[i], 0.0f, 1.0f);
        buf[i] = static_cast<unsigned char>(v * 255.0f + 0.5f);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    std::vector<unsigned char> labs(ds.labels.size());
    for (std::size_t i = 0; i < labs.size(); ++i)
        labs[i] = static_cast<unsigned char>(ds.labels[i]);
    os.write(reinterpret_cast<const char*>(labs.data()), static_cast<std::streamsize>(labs.size()));
    check(os.good(), "write to '" + path + "' failed");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "cannot open dataset '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    check(is.gcount() == 4 && std::equal(magic, magic + 4, kMagic),
          "'" + path + "' is not a PKDS dataset");
    const std::uint32_t version = get_u32(is, "version");
    check(version == kVersion, "unsupported dataset version " + std::to_string(version));
    const std::uint32_t count = get_u32(is, "count");
    const std::uint32_t channels = get_u32(is, "channels");
    const std::uint32_t height = get_u32(is, "height");
    const std::uint32_t width = get_u32(is, "width");
    const std::uint32_t classes = get_u32(is, "classes");
    check(count >= 1, "dataset '" + path + "' is empty");
    check(channels >= 1 && height >= 1 && width >= 1, "dataset '" + path + "' has zero dims");
    check(classes >= 2 && classes <= 256, "dataset '" + path + "' has bad class count");

    Dataset ds;
    ds.classes = static_cast<int>(classes);
    ds.images = Tensor(static_cast<int>(count), static_cast<int>(channels),
                       static_cast<int>(height), static_cast<int>(width));
    ds.labels.resize(count);
    std::vector<unsigned char> buf(ds.images.data.size());
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    check(is.gcount() == static_cast<std::streamsize>(buf.size()),
          "dataset '" + path + "' truncated in pixel data");
    for (std::size_t i = 0; i < buf.size(); ++i)
        ds.images.data[i] = buf[i] * (1.0f / 255.0f);
    std::vector<unsigned char> labs(count);
    is.read(reinterpret_cast<char*>(labs.data()), static_cast<std::streamsize>(labs.size()));
    check(is.gcount() == static_cast<std::streamsize>(labs.size()),
          "dataset '" + path + "' truncated in label data");
    for (std::size_t i = 0; i < labs.size(); ++i) {
        check(labs[i] < classes, "dataset '" + path + "' has label " +
                                     std::to_string(static_cast<int>(labs[i])) +
                                     " >= classes " + std::to_string(classes));
        ds.labels[i] = labs[i];
    }
    return ds;
}

Dataset take_subset(const Dataset& ds, const std::vector<int>& indices) {
    check(!indices.empty(), "subset selection is empty");
    Dataset out;
    out.classes = ds.classes;
    out.images = Tensor(static_cast<int>(indices.size()), ds.images.c, ds.images.h, ds.images.w);
    out.labels.resize(indices.size());
    const std::size_t plane = static_cast<std::size_t>(ds.images.c) * ds.images.h * ds.images.w;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int src = indices[i];
        check(src >= 0 && src < ds.count(), "subset index out of range");
        std::copy_n(ds.images.data.begin() + static_cast<std::ptrdiff_t>(src * plane), plane,
                    out.images.data.begin() + static_cast<std::ptrdiff_t>(i * plane));
        out.labels[i] = ds.labels[src];
    }
    return out;
}

Dataset stratified_sample(const Dataset& ds, int per_class, std::uint32_t seed) {
    check(per_class >= 1, "stratified sample needs per_class >= 1");
    std::mt19937 gen(seed);
    std::vector<int> chosen;
    for (int k = 0; k < ds.classes; ++k) {
        std::vector<int> members;
        for (int i = 0; i < ds.count(); ++i)
            if (ds.labels[i] == k) members.push_back(i);
        check(static_cast<int>(members.size()) >= per_class,
              "class " + std::to_string(k) + " has only " + std::to_string(members.size()) +
                  " samples, need " + std::to_string(per_class));
        shuffle_vec(members, gen);
        members.resize(per_class);
        std::sort(members.begin(), members.end());
        chosen.insert(chosen.end(), members.begin(), members.end());
    }
    return take_subset(ds, chosen);
}

} // namespace prunekit
