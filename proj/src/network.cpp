#include "prunekit/network.hpp"

#include <cmath>

#include "prunekit/rng.hpp"

namespace prunekit {

std::string kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Gap: return "gap";
        case LayerKind::Fc: return "fc";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::Softmax: return "softmax";
        case LayerKind::Add: return "add";
    }
    fail("bad layer kind value");
}

LayerKind kind_from_name(const std::string& s) {
    if (s == "conv") return LayerKind::Conv;
    if (s == "relu") return LayerKind::Relu;
    if (s == "maxpool") return LayerKind::MaxPool;
    if (s == "gap") return LayerKind::Gap;
    if (s == "fc") return LayerKind::Fc;
    if (s == "batchnorm") return LayerKind::BatchNorm;
    if (s == "softmax") return LayerKind::Softmax;
    fail("unknown layer kind '" + s + "'");
}

namespace {

void check_name(const std::string& name) {
    check(!name.empty(), "layer name must not be empty");
    check(name != "input" && name != "total", "layer name '" + name + "' is reserved");
    for (char ch : name) {
        const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                        (ch >= '0' && ch <= '9') || ch == '_' || ch == '-';
        check(ok, "layer name '" + name + "' has characters outside [A-Za-z0-9_-]");
    }
}

struct Dims {
    int c, h, w;
};

LayoutEntry make_entry(const LayerSpec& l, const std::string& block, int stage, Dims in) {
    LayoutEntry e;
    e.name = l.name;
    e.kind = l.kind;
    e.block = block;
    e.stage = stage;
    e.in_c = in.c;
    e.in_h = in.h;
    e.in_w = in.w;
    e.kernel = l.kernel;
    e.stride = l.stride;
    e.pad = l.pad;
    e.window = l.window;
    e.pool_stride = l.pool_stride;
    e.epsilon = l.epsilon;
    switch (l.kind) {
        case LayerKind::Conv: {
            check(l.out_channels >= 1, "conv '" + l.name + "' needs out_channels >= 1");
            check(l.kernel >= 1 && l.stride >= 1 && l.pad >= 0,
                  "conv '" + l.name + "' has bad kernel/stride/pad");
            const int ph = in.h + 2 * l.pad, pw = in.w + 2 * l.pad;
            check(ph >= l.kernel && pw >= l.kernel,
                  "conv '" + l.name + "' kernel " + std::to_string(l.kernel) +
                      " exceeds padded input " + std::to_string(ph) + "x" + std::to_string(pw));
            e.out_c = l.out_channels;
            e.out_h = (ph - l.kernel) / l.stride + 1;
            e.out_w = (pw - l.kernel) / l.stride + 1;
            break;
        }
        case LayerKind::Relu:
        case LayerKind::BatchNorm:
        case LayerKind::Softmax:
        case LayerKind::Add:
            e.out_c = in.c;
            e.out_h = in.h;
            e.out_w = in.w;
            break;
        case LayerKind::MaxPool: {
            check(l.window >= 1 && l.pool_stride >= 1,
                  "maxpool '" + l.name + "' has bad window/stride");
            check(l.window <= in.h && l.window <= in.w,
                  "maxpool '" + l.name + "' window " + std::to_string(l.window) +
                      " exceeds input " + std::to_string(in.h) + "x" + std::to_string(in.w));
            e.out_c = in.c;
            e.out_h = (in.h - l.window) / l.pool_stride + 1;
            e.out_w = (in.w - l.window) / l.pool_stride + 1;
            break;
        }
        case LayerKind::Gap:
            e.out_c = in.c;
            e.out_h = 1;
            e.out_w = 1;
            break;
        case LayerKind::Fc:
            check(l.units >= 1, "fc '" + l.name + "' needs units >= 1");
            e.out_c = l.units;
            e.out_h = 1;
            e.out_w = 1;
            break;
    }
    return e;
}

std::vector<LayerSpec> block_members(const ResidualBlockSpec& b, int in_channels) {
    check(b.stage1_channels >= 1 && b.stage2_channels >= 1,
          "block '" + b.name + "' needs positive stage channel counts");
    check(b.mid_kernel >= 1 && b.mid_kernel % 2 == 1,
          "block '" + b.name + "' middle kernel must be odd");
    std::vector<LayerSpec> out;
    auto conv = [&](const std::string& suffix, int d, int k) {
        LayerSpec l;
        l.name = b.name + "." + suffix;
        l.kind = LayerKind::Conv;
        l.out_channels = d;
        l.kernel = k;
        l.stride = 1;
        l.pad = k / 2;
        out.push_back(l);
    };
    auto aux = [&](const std::string& suffix, LayerKind kind) {
        LayerSpec l;
        l.name = b.name + "." + suffix;
        l.kind = kind;
        l.epsilon = b.epsilon;
        out.push_back(l);
    };
    conv("conv1", b.stage1_channels, 1);
    if (b.batchnorm) aux("bn1", LayerKind::BatchNorm);
    aux("relu1", LayerKind::Relu);
    conv("conv2", b.stage2_channels, b.mid_kernel);
    if (b.batchnorm) aux("bn2", LayerKind::BatchNorm);
    aux("relu2", LayerKind::Relu);
    conv("conv3", in_channels, 1);
    if (b.batchnorm) aux("bn3", LayerKind::BatchNorm);
    return out;
}

Tensor add_tensors(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "shortcut add on mismatched shapes " + a.shape_str() + " vs " +
                               b.shape_str());
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

} // namespace

std::vector<LayoutEntry> layout(const NetworkSpec& spec) {
    check(spec.input_c >= 1 && spec.input_h >= 1 && spec.input_w >= 1,
          "network input declaration must be positive");
    check(!spec.units.empty(), "network spec has no layers");
    std::vector<LayoutEntry> lay;
    Dims cur{spec.input_c, spec.input_h, spec.input_w};
    for (const UnitSpec& u : spec.units) {
        if (std::holds_alternative<LayerSpec>(u)) {
            const LayerSpec& l = std::get<LayerSpec>(u);
            check(l.kind != LayerKind::Add, "layer '" + l.name + "' uses reserved kind 'add'");
            LayoutEntry e = make_entry(l, "", 0, cur);
            cur = Dims{e.out_c, e.out_h, e.out_w};
            lay.push_back(std::move(e));
        } else {
            const ResidualBlockSpec& b = std::get<ResidualBlockSpec>(u);
            const Dims entry_dims = cur;
            int stage = 0;
            for (const LayerSpec& l : block_members(b, entry_dims.c)) {
                if (l.kind == LayerKind::Conv) ++stage;
                LayoutEntry e = make_entry(l, b.name, stage, cur);
                cur = Dims{e.out_c, e.out_h, e.out_w};
                lay.push_back(std::move(e));
            }
            check(cur.c == entry_dims.c && cur.h == entry_dims.h && cur.w == entry_dims.w,
                  "block '" + b.name + "' branch does not preserve its input shape");
            LayerSpec addl;
            addl.name = b.name;
            addl.kind = LayerKind::Add;
            LayoutEntry e = make_entry(addl, b.name, 0, cur);
            lay.push_back(std::move(e));
        }
    }
    return lay;
}

void validate_spec(const NetworkSpec& spec) {
    const std::vector<LayoutEntry> lay = layout(spec);
    std::map<std::string, int> seen;
    for (const LayoutEntry& e : lay) {
        const std::string base = e.block.empty() ? e.name : e.block;
        check_name(base);
        check(++seen[e.name] == 1, "duplicate layer name '" + e.name + "'");
        if (e.kind == LayerKind::Softmax)
            check(&e == &lay.back(), "softmax layer '" + e.name + "' must be terminal");
        if (e.kind == LayerKind::BatchNorm)
            check(e.epsilon > 0.0f, "batchnorm '" + e.name + "' needs epsilon > 0");
    }
}

const LayoutEntry* find_entry(const std::vector<LayoutEntry>& lay, const std::string& name) {
    for (const LayoutEntry& e : lay)
        if (e.name == name) return &e;
    return nullptr;
}

Network init_network(const NetworkSpec& spec, std::uint32_t seed) {
    validate_spec(spec);
    Network net;
    net.spec = spec;
    std::mt19937 gen(seed);
    for (const LayoutEntry& e : layout(spec)) {
        if (e.kind == LayerKind::Conv) {
            ConvWeights w(e.out_c, e.in_c, e.kernel);
            const float fan_in = static_cast<float>(e.in_c) * e.kernel * e.kernel;
            const float fan_out = static_cast<float>(e.out_c) * e.kernel * e.kernel;
            const float bound = std::sqrt(6.0f / (fan_in + fan_out));
            for (float& v : w.filters) v = uniform_float(gen, -bound, bound);
            net.conv[e.name] = std::move(w);
        } else if (e.kind == LayerKind::Fc) {
            const int in_units = e.in_c * e.in_h * e.in_w;
            FcWeights w(e.out_c, in_units);
            const float bound = std::sqrt(6.0f / (static_cast<float>(in_units) + e.out_c));
            for (float& v : w.weights) v = uniform_float(gen, -bound, bound);
            net.fc[e.name] = std::move(w);
        } else if (e.kind == LayerKind::BatchNorm) {
            net.bn[e.name] = BatchNormParams(e.in_c, e.epsilon);
        }
    }
    return net;
}

ForwardResult forward(Network& net, const Tensor& batch, Mode mode, const AblationMask* ablate) {
    check(batch.c == net.spec.input_c && batch.h == net.spec.input_h &&
              batch.w == net.spec.input_w,
          "batch shape " + batch.shape_str() + " does not match network input (" +
              std::to_string(net.spec.input_c) + "," + std::to_string(net.spec.input_h) + "," +
              std::to_string(net.spec.input_w) + ")");
    const std::vector<LayoutEntry> lay = layout(net.spec);
    ForwardResult r;
    Tensor x = batch;
    std::map<std::string, Tensor> block_inputs;
    bool ablated = false;
    for (const LayoutEntry& e : lay) {
        if (!e.block.empty() && e.kind == LayerKind::Conv && e.stage == 1)
            block_inputs[e.block] = x;
        switch (e.kind) {
            case LayerKind::Conv:
                x = conv2d_forward(x, net.conv.at(e.name), e.stride, e.pad);
                break;
            case LayerKind::Relu:
                x = relu_forward(x);
                break;
            case LayerKind::MaxPool:
                x = maxpool_forward(x, e.window, e.pool_stride);
                break;
            case LayerKind::Gap:
                x = global_avg_pool(x);
                break;
            case LayerKind::Fc:
                x = fc_forward(x, net.fc.at(e.name));
                break;
            case LayerKind::BatchNorm: {
                BatchNormCache cache;
                x = batchnorm_forward(x, net.bn.at(e.name), mode == Mode::Train, &cache);
                r.bn_cache[e.name] = std::move(cache);
                break;
            }
            case LayerKind::Softmax:
                r.logits = x;
                x = softmax_forward(x);
                break;
            case LayerKind::Add:
                x = add_tensors(x, block_inputs.at(e.name));
                break;
        }
        if (ablate && ablate->layer == e.name) {
            ablated = true;
            for (int ch : ablate->channels) {
                check(ch >= 0 && ch < x.c, "ablation channel " + std::to_string(ch) +
                                               " out of range for layer '" + e.name + "'");
                for (int b = 0; b < x.n; ++b)
                    for (int y = 0; y < x.h; ++y)
                        for (int xx = 0; xx < x.w; ++xx) x.at(b, ch, y, xx) = 0.0f;
            }
        }
        r.order.push_back(e.name);
        r.activations[e.name] = x;
    }
    check(!ablate || ablated, "ablation layer '" + (ablate ? ablate->layer : "") + "' not found");
    if (lay.back().kind == LayerKind::Softmax) {
        r.logits_name = lay[lay.size() - 2].name;
    } else {
        r.logits = x;
        r.logits_name = lay.back().name;
    }
    return r;
}

NetworkGrads backward(Network& net, const Tensor& batch, const ForwardResult& fwd,
                      const Tensor& grad_logits, bool record_act_grads, Mode mode) {
    const std::vector<LayoutEntry> lay = layout(net.spec);
    check(fwd.order.size() == lay.size(), "forward result does not match this network");

    // index of the layer whose output feeds each block's shortcut (-1 = batch)
    std::map<std::string, int> shortcut_producer;
    for (std::size_t i = 0; i < lay.size(); ++i)
        if (!lay[i].block.empty() && lay[i].kind == LayerKind::Conv && lay[i].stage == 1)
            shortcut_producer[lay[i].block] = static_cast<int>(i) - 1;

    auto input_of = [&](int i) -> const Tensor& {
        return i == 0 ? batch : fwd.activations.at(lay[i - 1].name);
    };

    int start = static_cast<int>(lay.size()) - 1;
    if (lay[start].kind == LayerKind::Softmax) --start;
    check(start >= 0, "network has no trainable path before the softmax layer");
    check(grad_logits.same_shape(fwd.activations.at(lay[start].name)),
          "grad_logits shape " + grad_logits.shape_str() + " does not match logits");

    NetworkGrads grads;
    std::map<int, Tensor> pending; // shortcut grads waiting for their producer
    Tensor g = grad_logits;
    for (int i = start; i >= 0; --i) {
        const LayoutEntry& e = lay[i];
        if (record_act_grads) grads.act_grads[e.name] = g;
        Tensor gin;
        switch (e.kind) {
            case LayerKind::Conv: {
                ConvGrads cg = conv2d_backward(input_of(i), net.conv.at(e.name), g, e.stride,
                                               e.pad);
                grads.conv[e.name] = std::move(cg.weights);
                gin = std::move(cg.input);
                break;
            }
            case LayerKind::Relu:
                gin = relu_backward(input_of(i), g);
                break;
            case LayerKind::MaxPool:
                gin = maxpool_backward(input_of(i), e.window, e.pool_stride, g);
                break;
            case LayerKind::Gap:
                gin = global_avg_pool_backward(input_of(i), g);
                break;
            case LayerKind::Fc: {
                FcGrads fg = fc_backward(input_of(i), net.fc.at(e.name), g);
                grads.fc[e.name] = std::move(fg.weights);
                gin = std::move(fg.input);
                break;
            }
            case LayerKind::BatchNorm: {
                BatchNormParams bg;
                gin = batchnorm_backward(input_of(i), net.bn.at(e.name),
                                         fwd.bn_cache.at(e.name), g, bg,
                                         mode == Mode::Train);
                grads.bn[e.name] = std::move(bg);
                break;
            }
            case LayerKind::Softmax:
                fail("softmax layer '" + e.name + "' cannot sit inside the backward path");
            case LayerKind::Add: {
                const int producer = shortcut_producer.at(e.name);
                auto it = pending.find(producer);
                if (it == pending.end())
                    pending.emplace(producer, g);
                else
                    it->second = add_tensors(it->second, g);
                gin = g;
                break;
            }
        }
        g = std::move(gin);
        auto it = pending.find(i - 1);
        if (it != pending.end()) {
            g = add_tensors(g, it->second);
            pending.erase(it);
        }
    }
    return grads;
}

} // namespace prunekit
