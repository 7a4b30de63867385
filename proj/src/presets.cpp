#include "prunekit/presets.hpp"

namespace prunekit {

namespace {

LayerSpec conv(const std::string& name, int d, int k = 3, int pad = 1) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::Conv;
    l.out_channels = d;
    l.kernel = k;
    l.pad = pad;
    return l;
}

LayerSpec relu(const std::string& name) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::Relu;
    return l;
}

LayerSpec maxpool(const std::string& name, int window = 2, int stride = 2) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::MaxPool;
    l.window = window;
    l.pool_stride = stride;
    return l;
}

LayerSpec gap(const std::string& name) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::Gap;
    return l;
}

LayerSpec fc(const std::string& name, int units) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::Fc;
    l.units = units;
    return l;
}

// five conv groups; depths[g] is the channel width of group g
NetworkSpec vgg_backbone(const int depths[5]) {
    const int group_sizes[5] = {2, 2, 3, 3, 3};
    NetworkSpec s;
    s.input_c = 3;
    s.input_h = 224;
    s.input_w = 224;
    for (int g = 0; g < 5; ++g) {
        const std::string gn = std::to_string(g + 1);
        for (int i = 0; i < group_sizes[g]; ++i) {
            const std::string suffix = gn + "-" + std::to_string(i + 1);
            s.units.push_back(conv("conv" + suffix, depths[g]));
            s.units.push_back(relu("relu" + suffix));
        }
        s.units.push_back(maxpool("pool" + gn));
    }
    return s;
}

} // namespace

NetworkSpec vgg16_spec() {
    const int depths[5] = {64, 128, 256, 512, 512};
    NetworkSpec s = vgg_backbone(depths);
    s.units.push_back(fc("fc6", 4096));
    s.units.push_back(relu("relu6"));
    s.units.push_back(fc("fc7", 4096));
    s.units.push_back(relu("relu7"));
    s.units.push_back(fc("fc8", 1000));
    validate_spec(s);
    return s;
}

NetworkSpec vgg16_halved_spec() {
    const int depths[5] = {32, 64, 128, 256, 512};
    NetworkSpec s = vgg_backbone(depths);
    s.units.push_back(gap("gap"));
    s.units.push_back(fc("fc8", 1000));
    validate_spec(s);
    return s;
}

NetworkSpec smallnet_spec(int classes, int in_c, int in_h, int in_w) {
    check(classes >= 2, "need at least 2 classes");
    NetworkSpec s;
    s.input_c = in_c;
    s.input_h = in_h;
    s.input_w = in_w;
    s.units.push_back(conv("conv1", 8));
    s.units.push_back(relu("relu1"));
    s.units.push_back(maxpool("pool1"));
    s.units.push_back(conv("conv2", 16));
    s.units.push_back(relu("relu2"));
    s.units.push_back(maxpool("pool2"));
    s.units.push_back(fc("fc", classes));
    validate_spec(s);
    return s;
}

NetworkSpec smallres_spec(int classes, int in_c, int in_h, int in_w) {
    check(classes >= 2, "need at least 2 classes");
    NetworkSpec s;
    s.input_c = in_c;
    s.input_h = in_h;
    s.input_w = in_w;
    s.units.push_back(conv("stem", 16));
    s.units.push_back(relu("stem_relu"));
    for (int b = 1; b <= 3; ++b) {
        ResidualBlockSpec blk;
        blk.name = "block" + std::to_string(b);
        blk.stage1_channels = 8;
        blk.stage2_channels = 8;
        blk.mid_kernel = 3;
        blk.batchnorm = true;
        s.units.push_back(blk);
    }
    s.units.push_back(gap("gap"));
    s.units.push_back(fc("fc", classes));
    validate_spec(s);
    return s;
}

std::vector<std::string> preset_names() {
    return {"vgg16", "vgg16_halved", "smallnet", "smallres"};
}

NetworkSpec preset_spec(const std::string& name, int classes) {
    if (name == "vgg16") return vgg16_spec();
    if (name == "vgg16_halved") return vgg16_halved_spec();
    if (name == "smallnet") return smallnet_spec(classes);
    if (name == "smallres") return smallres_spec(classes);
    fail("unknown preset '" + name +
         "' (expected vgg16, vgg16_halved, smallnet or smallres)");
}

} // namespace prunekit
