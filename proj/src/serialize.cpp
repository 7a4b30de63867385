#include "prunekit/serialize.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace prunekit {

namespace {

constexpr const char* kHeader = "prunekit-model v1";

std::string hexfloat(float v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", static_cast<double>(v));
    return buf;
}

float parse_hexfloat(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const float v = std::strtof(s.c_str(), &end);
    check(end && *end == '\0' && end != s.c_str(), "bad float '" + s + "' in " + what);
    return v;
}

long parse_int(const std::string& s, const std::string& what) {
    check(!s.empty(), "missing integer in " + what);
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    check(end && *end == '\0', "bad integer '" + s + "' in " + what);
    return v;
}

std::map<std::string, std::string> parse_fields(std::istringstream& iss,
                                                const std::string& line) {
    std::map<std::string, std::string> kv;
    std::string tok;
    while (iss >> tok) {
        const auto eq = tok.find('=');
        check(eq != std::string::npos && eq > 0, "bad field '" + tok + "' in line: " + line);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

std::string need(const std::map<std::string, std::string>& kv, const std::string& key,
                 const std::string& line) {
    const auto it = kv.find(key);
    check(it != kv.end(), "missing field '" + key + "' in line: " + line);
    return it->second;
}

struct ParamRef {
    std::string name; // "<layer>.<part>"
    const std::vector<float>* values;
};

std::vector<ParamRef> param_directory(const Network& net) {
    std::vector<ParamRef> out;
    for (const LayoutEntry& e : layout(net.spec)) {
        if (e.kind == LayerKind::Conv) {
            const ConvWeights& w = net.conv.at(e.name);
            out.push_back({e.name + ".filters", &w.filters});
            out.push_back({e.name + ".bias", &w.bias});
        } else if (e.kind == LayerKind::Fc) {
            const FcWeights& w = net.fc.at(e.name);
            out.push_back({e.name + ".weights", &w.weights});
            out.push_back({e.name + ".bias", &w.bias});
        } else if (e.kind == LayerKind::BatchNorm) {
            const BatchNormParams& p = net.bn.at(e.name);
            out.push_back({e.name + ".scale", &p.scale});
            out.push_back({e.name + ".shift", &p.shift});
            out.push_back({e.name + ".running_mean", &p.running_mean});
            out.push_back({e.name + ".running_var", &p.running_var});
        }
    }
    return out;
}

void write_unit(std::ostream& os, const UnitSpec& u) {
    if (std::holds_alternative<LayerSpec>(u)) {
        const LayerSpec& l = std::get<LayerSpec>(u);
        os << "layer name=" << l.name << " kind=" << kind_name(l.kind);
        switch (l.kind) {
            case LayerKind::Conv:
                os << " out_channels=" << l.out_channels << " kernel=" << l.kernel
                   << " stride=" << l.stride << " pad=" << l.pad;
                break;
            case LayerKind::MaxPool:
                os << " window=" << l.window << " stride=" << l.pool_stride;
                break;
            case LayerKind::Fc:
                os << " units=" << l.units;
                break;
            case LayerKind::BatchNorm:
                os << " epsilon=" << hexfloat(l.epsilon);
                break;
            default:
                break;
        }
        os << "\n";
    } else {
        const ResidualBlockSpec& b = std::get<ResidualBlockSpec>(u);
        os << "block name=" << b.name << " stage1=" << b.stage1_channels
           << " stage2=" << b.stage2_channels << " kernel=" << b.mid_kernel
           << " batchnorm=" << (b.batchnorm ? 1 : 0) << " epsilon=" << hexfloat(b.epsilon)
           << "\n";
    }
}

} // namespace

std::uint32_t crc32(const unsigned char* data, std::size_t len) {
    static std::uint32_t table[256];
    static bool ready = false;
    if (!ready) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        ready = true;
    }
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void save_model(const Network& net, const std::string& path) {
    validate_spec(net.spec);
    std::ofstream os(path, std::ios::binary);
    check(os.good(), "cannot open '" + path + "' for writing");
    os << kHeader << "\n";
    os << "input " << net.spec.input_c << " " << net.spec.input_h << " " << net.spec.input_w
       << "\n";
    for (const UnitSpec& u : net.spec.units) write_unit(os, u);

    const std::vector<ParamRef> dir = param_directory(net);
    std::vector<unsigned char> blob;
    std::size_t offset = 0;
    for (const ParamRef& p : dir) {
        os << "param " << p.name << " offset=" << offset << " count=" << p.values->size()
           << "\n";
        offset += p.values->size();
        for (float v : *p.values) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            blob.push_back(static_cast<unsigned char>(bits & 0xff));
            blob.push_back(static_cast<unsigned char>((bits >> 8) & 0xff));
            blob.push_back(static_cast<unsigned char>((bits >> 16) & 0xff));
            blob.push_back(static_cast<unsigned char>((bits >> 24) & 0xff));
        }
    }
    char crcbuf[16];
    std::snprintf(crcbuf, sizeof crcbuf, "%08x", crc32(blob.data(), blob.size()));
    os << "blob floats=" << offset << " crc32=" << crcbuf << "\n";
    os.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    check(os.good(), "write to '" + path + "' failed");
}

Network load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "cannot open model '" + path + "'");
    std::string line;
    check(static_cast<bool>(std::getline(is, line)) && line == kHeader,
          "'" + path + "' is not a prunekit model (bad header)");

    Network net;
    struct ParamRecord {
        std::string name;
        std::size_t offset, count;
    };
    std::vector<ParamRecord> records;
    std::size_t blob_floats = 0;
    std::string blob_crc;
    bool input_seen = false, blob_seen = false;

    while (std::getline(is, line)) {
        std::istringstream iss(line);
        std::string head;
        iss >> head;
        if (head == "input") {
            std::string c, h, w;
            iss >> c >> h >> w;
            net.spec.input_c = static_cast<int>(parse_int(c, "input line"));
            net.spec.input_h = static_cast<int>(parse_int(h, "input line"));
            net.spec.input_w = static_cast<int>(parse_int(w, "input line"));
            input_seen = true;
        } else if (head == "layer") {
            const auto kv = parse_fields(iss, line);
            LayerSpec l;
            l.name = need(kv, "name", line);
            l.kind = kind_from_name(need(kv, "kind", line));
            switch (l.kind) {
                case LayerKind::Conv:
                    l.out_channels = static_cast<int>(parse_int(need(kv, "out_channels", line), l.name));
                    l.kernel = static_cast<int>(parse_int(need(kv, "kernel", line), l.name));
                    l.stride = static_cast<int>(parse_int(need(kv, "stride", line), l.name));
                    l.pad = static_cast<int>(parse_int(need(kv, "pad", line), l.name));
                    break;
                case LayerKind::MaxPool:
                    l.window = static_cast<int>(parse_int(need(kv, "window", line), l.name));
                    l.pool_stride = static_cast<int>(parse_int(need(kv, "stride", line), l.name));
                    break;
                case LayerKind::Fc:
                    l.units = static_cast<int>(parse_int(need(kv, "units", line), l.name));
                    break;
                case LayerKind::BatchNorm:
                    l.epsilon = parse_hexfloat(need(kv, "epsilon", line), l.name);
                    break;
                default:
                    break;
            }
            net.spec.units.emplace_back(l);
        } else if (head == "block") {
            const auto kv = parse_fields(iss, line);
            ResidualBlockSpec b;
            b.name = need(kv, "name", line);
            b.stage1_channels = static_cast<int>(parse_int(need(kv, "stage1", line), b.name));
            b.stage2_channels = static_cast<int>(parse_int(need(kv, "stage2", line), b.name));
            b.mid_kernel = static_cast<int>(parse_int(need(kv, "kernel", line), b.name));
            b.batchnorm = parse_int(need(kv, "batchnorm", line), b.name) != 0;
            b.epsilon = parse_hexfloat(need(kv, "epsilon", line), b.name);
            net.spec.units.emplace_back(b);
        } else if (head == "param") {
            std::string pname;
            iss >> pname;
            const auto kv = parse_fields(iss, line);
            records.push_back({pname,
                               static_cast<std::size_t>(parse_int(need(kv, "offset", line), pname)),
                               static_cast<std::size_t>(parse_int(need(kv, "count", line), pname))});
        } else if (head == "blob") {
            const auto kv = parse_fields(iss, line);
            blob_floats = static_cast<std::size_t>(parse_int(need(kv, "floats", line), "blob"));
            blob_crc = need(kv, "crc32", line);
            blob_seen = true;
            break;
        } else {
            fail("unrecognized manifest line in '" + path + "': " + line);
        }
    }
    check(input_seen, "model '" + path + "' is missing its input declaration");
    check(blob_seen, "model '" + path + "' is missing the blob line");
    validate_spec(net.spec);

    std::vector<unsigned char> blob(blob_floats * 4);
    is.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    check(is.gcount() == static_cast<std::streamsize>(blob.size()),
          "model '" + path + "' blob is truncated");
    char trailing;
    check(!is.read(&trailing, 1), "model '" + path + "' has trailing data after the blob");
    char crcbuf[16];
    std::snprintf(crcbuf, sizeof crcbuf, "%08x", crc32(blob.data(), blob.size()));
    check(blob_crc == crcbuf, "model '" + path + "' blob checksum mismatch (manifest " +
                                  blob_crc + ", payload " + crcbuf + ")");

    // materialize parameter holders, then fill them in manifest order
    for (const LayoutEntry& e : layout(net.spec)) {
        if (e.kind == LayerKind::Conv)
            net.conv[e.name] = ConvWeights(e.out_c, e.in_c, e.kernel);
        else if (e.kind == LayerKind::Fc)
            net.fc[e.name] = FcWeights(e.out_c, e.in_c * e.in_h * e.in_w);
        else if (e.kind == LayerKind::BatchNorm)
            net.bn[e.name] = BatchNormParams(e.in_c, e.epsilon);
    }
    const std::vector<ParamRef> dir = param_directory(net);
    check(dir.size() == records.size(),
          "model '" + path + "' has " + std::to_string(records.size()) +
              " parameter records, spec requires " + std::to_string(dir.size()));
    for (std::size_t i = 0; i < dir.size(); ++i) {
        const ParamRecord& r = records[i];
        check(r.name == dir[i].name, "parameter record '" + r.name + "' where '" +
                                         dir[i].name + "' was expected");
        check(r.count == dir[i].values->size(),
              "parameter '" + r.name + "' count " + std::to_string(r.count) +
                  " does not match spec shape " + std::to_string(dir[i].values->size()));
        check(r.offset + r.count <= blob_floats, "parameter '" + r.name + "' overruns the blob");
        auto* dst = const_cast<std::vector<float>*>(dir[i].values);
        for (std::size_t j = 0; j < r.count; ++j) {
            const std::size_t at = (r.offset + j) * 4;
            const std::uint32_t bits = static_cast<std::uint32_t>(blob[at]) |
                                       (static_cast<std::uint32_t>(blob[at + 1]) << 8) |
                                       (static_cast<std::uint32_t>(blob[at + 2]) << 16) |
                                       (static_cast<std::uint32_t>(blob[at + 3]) << 24);
            float v;
            std::memcpy(&v, &bits, 4);
            (*dst)[j] = v;
        }
    }
    return net;
}

} // namespace prunekit
