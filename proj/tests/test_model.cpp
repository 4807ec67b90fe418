#include <catch2/catch_amalgamated.hpp>

#include "helpers/gradcheck.hpp"
#include "helpers/testutil.hpp"
#include "isgan/disentangle.hpp"
#include "isgan/model/bundle.hpp"

using namespace isgan;
using namespace isgan::model;
using testutil::random_tensor;

namespace {

/// Smallest config that exercises every component (16x8 images, 4x2 map).
ModelConfig micro_config(Variant v = Variant::DC) {
    ModelConfig c;
    c.height = 16;
    c.width = 8;
    c.layout.branches = {1, 2};
    c.layout.per_part_dim = 4;
    c.backbone_channels = {4, 6};
    c.backbone_strides = {2, 2};
    c.head_channels = 5;
    c.head_kernel = 3;
    c.noise_dim = 3;
    c.gen_base_h = 2;
    c.gen_base_w = 1;
    c.gen_base_channels = 8;
    c.gen_stage_channels = {6, 5};
    c.gen_dropout_stages = 2;
    c.disc_channels = {4, 6};
    c.dd_head_blocks = 1;
    c.variant = v;
    return c;
}

}  // namespace

TEST_CASE("model config validation") {
    ModelConfig paper;  // defaults mirror the full-scale setup
    REQUIRE_NOTHROW(paper.validate());
    REQUIRE(paper.feature_h() == 48);
    REQUIRE(paper.gen_stages() == 6);          // 6 * 2^6 = 384
    REQUIRE(paper.disc_trunk_h() == 12);       // 5 stride-2 blocks: 384/32
    REQUIRE(paper.disc_trunk_w() == 4);

    ModelConfig toy = toy_model_config();
    REQUIRE_NOTHROW(toy.validate());
    REQUIRE(toy.feature_h() == 8);             // 64 / (2*2*2*1)
    REQUIRE(toy.feature_w() == 4);
    REQUIRE(toy.gen_stages() == 5);            // 2 * 2^5 = 64
    REQUIRE(toy.disc_trunk_h() == 4);          // 4 stride-2 blocks: 64/16
    REQUIRE(toy.disc_trunk_w() == 2);

    // 64-height with a 3-strip branch cannot divide evenly
    ModelConfig bad = toy_model_config();
    bad.layout.branches = {1, 2, 3};
    REQUIRE_THROWS(bad.validate());

    // resolution not a power-of-two multiple of the generator base grid
    ModelConfig bad2 = toy_model_config();
    bad2.gen_base_h = 3;
    REQUIRE_THROWS(bad2.validate());
}

TEST_CASE("part layout arithmetic") {
    PartLayout def;  // [1,2,3], p=256
    REQUIRE(def.num_parts() == 8);
    REQUIRE(def.feature_dim() == 2048);
    PartLayout alt;
    alt.branches = {1, 2};
    REQUIRE(alt.num_parts() == 4);
    PartLayout toy;
    toy.branches = {1, 2, 4};
    REQUIRE(toy.num_parts() == 9);
    REQUIRE(def.part_index(0, -1) == 0);
    REQUIRE(def.part_index(1, -1) == 1);
    REQUIRE(def.part_index(1, 1) == 3);
    REQUIRE(def.part_index(2, 2) == 7);
}

TEST_CASE("backbone: shape arithmetic, totality, batching") {
    ModelBundle m(toy_model_config(), 5, 1);
    Tensor zero({2, 3, 64, 32});
    Var map = m.backbone_forward(zero);
    REQUIRE(map.value().shape() == std::vector<int>{2, 64, 8, 4});  // stride 8: 8x4 map
    REQUIRE(map.value().all_finite());

    Tensor batch5 = random_tensor({5, 3, 64, 32}, RngStream(2), 0.2);
    for (std::int64_t i = 0; i < batch5.numel(); ++i) batch5[i] = std::abs(batch5[i]) * 0.5;
    REQUIRE(m.backbone_forward(batch5).value().dim(0) == 5);

    Tensor wrong({1, 3, 32, 32});
    REQUIRE_THROWS(m.backbone_forward(wrong));
}

TEST_CASE("encode_parts: default layout gives 8 parts of dim 256 (2048 total)") {
    ModelConfig paper;
    ModelBundle m(paper, 4, 3);
    // run the heads on a small fabricated map (height divisible by 1,2,3)
    Var map = Var::leaf(random_tensor({2, paper.backbone_channels.back(), 6, 2}, RngStream(5), 0.3));
    PartSet r = m.encode_parts(map);
    REQUIRE(r.parts.size() == 8);
    for (const auto& p : r.parts) REQUIRE(p.value().shape() == std::vector<int>{2, 256});
    REQUIRE(r.concat().value().shape() == std::vector<int>{2, 2048});
}

TEST_CASE("encode_parts: [1,2] layout yields K=4; constant map makes locals equal") {
    ModelConfig c = micro_config();
    ModelBundle m(c, 3, 7);
    Var map = Var::leaf(Tensor({1, c.backbone_channels.back(), 4, 2}, 0.37));
    PartSet r = m.encode_parts(map);
    REQUIRE(r.parts.size() == 4);
    // branch 2's two locals see identical strip content under a shared head
    REQUIRE(bit_equal(r.parts[2].value(), r.parts[3].value()));
}

TEST_CASE("encode_parts: vertical flip permutes locals under strip-agnostic heads") {
    ModelConfig c = micro_config();
    c.head_kernel = 1;  // 1x1 convs are flip-equivariant
    c.layout.branches = {1, 4};
    ModelBundle m(c, 3, 11);
    Tensor map = random_tensor({1, c.backbone_channels.back(), 8, 2}, RngStream(13));
    Tensor flipped({1, c.backbone_channels.back(), 8, 2});
    for (int ch = 0; ch < c.backbone_channels.back(); ++ch)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 2; ++x)
                flipped[flipped.idx4(0, ch, y, x)] = map[map.idx4(0, ch, 7 - y, x)];

    PartSet a = m.encode_parts(Var::leaf(map));
    PartSet b = m.encode_parts(Var::leaf(flipped));
    // globals equal
    REQUIRE(allclose(a.parts[0].value(), b.parts[0].value(), 1e-12));
    REQUIRE(allclose(a.parts[1].value(), b.parts[1].value(), 1e-12));
    // locals reversed: strip i <-> strip 3-i
    for (int s = 0; s < 4; ++s) {
        int ka = a.layout.part_index(1, s);
        int kb = a.layout.part_index(1, 3 - s);
        REQUIRE(allclose(a.parts[static_cast<std::size_t>(ka)].value(),
                         b.parts[static_cast<std::size_t>(kb)].value(), 1e-12));
    }
}

TEST_CASE("encode_unrelated: DC emits parts directly; KL reparameterizes") {
    SECTION("DC dimension contract") {
        ModelConfig c = toy_model_config();
        ModelBundle m(c, 4, 17);
        Tensor imgs = random_tensor({2, 3, 64, 32}, RngStream(19), 0.1);
        for (std::int64_t i = 0; i < imgs.numel(); ++i) imgs[i] = std::abs(imgs[i]);
        Var map = m.backbone_forward(imgs);
        PartSet r = m.encode_parts(map);
        FwdCtx ctx;
        auto u = m.encode_unrelated(map, ctx);
        REQUIRE(u.kl_params.empty());
        REQUIRE(u.parts.parts.size() == r.parts.size());
        REQUIRE(u.parts.concat().value().dim(1) == c.layout.feature_dim());
        REQUIRE(r.concat().value().dim(1) == c.layout.feature_dim());
    }
    SECTION("KL: eval means eps=0 so sample == mean; training draws differ") {
        ModelConfig c = micro_config(Variant::KL);
        ModelBundle m(c, 3, 23);
        Var map = Var::leaf(random_tensor({2, c.backbone_channels.back(), 4, 2}, RngStream(29)));
        FwdCtx eval_ctx;  // training=false
        auto u0 = m.encode_unrelated(map, eval_ctx);
        REQUIRE(u0.kl_params.size() == u0.parts.parts.size());
        for (std::size_t k = 0; k < u0.parts.parts.size(); ++k)
            REQUIRE(bit_equal(u0.parts.parts[k].value(), u0.kl_params[k].first.value()));

        FwdCtx t1{true, RngStream(100)};
        FwdCtx t2{true, RngStream(200)};
        auto ua = m.encode_unrelated(map, t1);
        auto ub = m.encode_unrelated(map, t2);
        REQUIRE_FALSE(bit_equal(ua.parts.parts[0].value(), ub.parts.parts[0].value()));
        REQUIRE(bit_equal(ua.kl_params[0].first.value(), ub.kl_params[0].first.value()));
        // sampled dimension matches the composition contract
        REQUIRE(ua.parts.concat().value().dim(1) == c.layout.feature_dim());
    }
}

TEST_CASE("generate: stage arithmetic, determinism, range, label validation") {
    ModelConfig toy = toy_model_config();
    ModelBundle m(toy, 5, 31);
    REQUIRE(toy.gen_stages() == 5);  // 64x32 from a 2x1 base

    ModelConfig paper;
    REQUIRE(paper.gen_stages() == 6);  // 384x128 from a 6x2 base

    int d = toy.layout.feature_dim();
    Var composed = Var::leaf(random_tensor({1, d}, RngStream(37), 0.5));
    Var noise = Var::leaf(random_tensor({1, toy.noise_dim}, RngStream(41)));
    Var onehot = Var::leaf(m.onehot({2}));

    FwdCtx eval_ctx;  // inference: dropout off, BN running stats
    Var img1 = m.generate(composed, noise, onehot, eval_ctx);
    Var img2 = m.generate(composed, noise, onehot, eval_ctx);
    REQUIRE(img1.value().shape() == std::vector<int>{1, 3, 64, 32});
    REQUIRE(bit_equal(img1.value(), img2.value()));
    for (std::int64_t i = 0; i < img1.value().numel(); ++i) {
        REQUIRE(img1.value()[i] >= 0.0);
        REQUIRE(img1.value()[i] <= 1.0);
    }

    // all-zero one-hot = label-free generation is allowed
    Var zeros = Var::leaf(Tensor({1, 5}));
    REQUIRE_NOTHROW(m.generate(composed, noise, zeros, eval_ctx));
    // anything else is rejected
    Tensor badv({1, 5});
    badv[0] = 0.4;
    Var bad = Var::leaf(badv);
    REQUIRE_THROWS(m.generate(composed, noise, bad, eval_ctx));
}

TEST_CASE("discriminators: patch map extents and class logits") {
    ModelConfig toy = toy_model_config();
    ModelBundle m(toy, 20, 43);
    Tensor img({2, 3, 64, 32}, 0.0);
    Var patches = m.discriminate_domain(Var::leaf(img));
    REQUIRE(patches.value().shape() == std::vector<int>{2, 1, 4, 2});  // 4 stride-2 blocks
    REQUIRE(patches.value().all_finite());

    Var logits = m.discriminate_class(Var::leaf(img));
    REQUIRE(logits.value().shape() == std::vector<int>{2, 20});
    Tensor probs = softmax_tensor(logits.value());
    for (int i = 0; i < 2; ++i) {
        double s = 0;
        for (int c = 0; c < 20; ++c) s += probs[probs.idx2(i, c)];
        REQUIRE(s == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("paper-scale discriminator trunk map is 12x4") {
    ModelConfig paper;
    ModelBundle m(paper, 3, 47);
    Tensor img({1, 3, 384, 128}, 0.1);
    Var patches = m.discriminate_domain(Var::leaf(img));
    REQUIRE(patches.value().dim(2) == 12);
    REQUIRE(patches.value().dim(3) == 4);
}

TEST_CASE("end-to-end differentiability: parameter gradients match finite differences") {
    ModelConfig c = micro_config();
    ModelBundle m(c, 3, 51);
    Tensor imgs = random_tensor({2, 3, 16, 8}, RngStream(53), 0.2);
    for (std::int64_t i = 0; i < imgs.numel(); ++i) imgs[i] = 0.5 + 0.3 * std::tanh(imgs[i]);
    RngStream base(57);

    auto subset = [&](Component comp, int per_tensor) {
        auto all = m.params(comp);
        std::vector<Var> leaves;
        for (auto& p : all) leaves.push_back(*p.var);
        (void)per_tensor;
        return leaves;
    };

    SECTION("encoder path probe") {
        auto probe = [&] {
            Var map = m.backbone_forward(imgs);
            PartSet r = m.encode_parts(map);
            FwdCtx ctx;  // eval: deterministic
            auto u = m.encode_unrelated(map, ctx);
            Var logits_sum;
            for (auto& l : m.classifier_logits(r))
                logits_sum = logits_sum.defined() ? add(logits_sum, sum(vtanh(l))) : sum(vtanh(l));
            return add(logits_sum, sum(vtanh(disentangle::compose(r, u.parts))));
        };
        std::vector<Var> leaves;
        for (Component comp : {Component::Backbone, Component::EncoderR, Component::Classifier,
                               Component::EncoderU})
            for (auto& v : subset(comp, 3)) leaves.push_back(v);
        REQUIRE(testutil::gradcheck(probe, leaves, 1e-5, 3, base.derive(1)) < 1e-3);
    }

    SECTION("generator probe (training mode, fixed masks)") {
        Tensor composed = random_tensor({2, c.layout.feature_dim()}, RngStream(61), 0.5);
        Tensor noise = random_tensor({2, c.noise_dim}, RngStream(67));
        Tensor oh = m.onehot({0, 2});
        auto probe = [&] {
            FwdCtx ctx{true, RngStream(71)};
            return sum(m.generate(Var::leaf(composed), Var::leaf(noise), Var::leaf(oh), ctx));
        };
        REQUIRE(testutil::gradcheck(probe, subset(Component::Generator, 3), 1e-5, 3,
                                    base.derive(2)) < 1e-3);
    }

    SECTION("discriminator probes") {
        auto probe_d = [&] { return sum(vsigmoid(m.discriminate_domain(Var::leaf(imgs)))); };
        REQUIRE(testutil::gradcheck(probe_d, subset(Component::DiscDomain, 3), 1e-5, 3,
                                    base.derive(3)) < 1e-3);
        auto probe_c = [&] { return sum(vtanh(m.discriminate_class(Var::leaf(imgs)))); };
        REQUIRE(testutil::gradcheck(probe_c, subset(Component::DiscClass, 3), 1e-5, 3,
                                    base.derive(4)) < 1e-3);
    }
}

TEST_CASE("bundle serialization round-trips bit-exactly") {
    testutil::TempDir td("bundle");
    ModelConfig c = micro_config(Variant::KL);
    ModelBundle m(c, 4, 77);
    Tensor imgs = random_tensor({1, 3, 16, 8}, RngStream(79), 0.2);
    for (std::int64_t i = 0; i < imgs.numel(); ++i) imgs[i] = 0.5 + 0.4 * std::tanh(imgs[i]);

    // push the generator once in training mode so BN buffers are non-trivial
    {
        FwdCtx ctx{true, RngStream(83)};
        Var composed = Var::leaf(random_tensor({2, c.layout.feature_dim()}, RngStream(89), 0.3));
        m.generate(composed, Var::leaf(random_tensor({2, c.noise_dim}, RngStream(97))),
                   Var::leaf(m.onehot({0, 1})), ctx);
    }

    std::map<std::string, Tensor> blobs;
    m.export_tensors(blobs);
    blobio::write_file(td.str() + "/m.ckpt", "{}", blobs);

    ModelBundle m2(c, 4, 12345);  // different init
    auto f = blobio::read_file(td.str() + "/m.ckpt");
    m2.import_tensors(f.blobs);

    for (Component comp : all_components())
        REQUIRE(m.component_hash(comp) == m2.component_hash(comp));

    Var map1 = m.backbone_forward(imgs);
    Var map2 = m2.backbone_forward(imgs);
    REQUIRE(bit_equal(map1.value(), map2.value()));
    PartSet r1 = m.encode_parts(map1);
    PartSet r2 = m2.encode_parts(map2);
    REQUIRE(bit_equal(r1.concat().value(), r2.concat().value()));

    FwdCtx e1, e2;
    Var composed1 = disentangle::compose(r1, m.encode_unrelated(map1, e1).parts);
    Var composed2 = disentangle::compose(r2, m2.encode_unrelated(map2, e2).parts);
    REQUIRE(bit_equal(composed1.value(), composed2.value()));

    Var g1 = m.generate(composed1, Var::leaf(Tensor({1, c.noise_dim}, 0.1)),
                        Var::leaf(m.onehot({1})), e1);
    Var g2 = m2.generate(composed2, Var::leaf(Tensor({1, c.noise_dim}, 0.1)),
                         Var::leaf(m2.onehot({1})), e2);
    REQUIRE(bit_equal(g1.value(), g2.value()));

    // import with a missing blob fails loudly
    auto broken = f.blobs;
    broken.erase(broken.begin());
    REQUIRE_THROWS(m2.import_tensors(broken));
}

TEST_CASE("external backbone hook bypasses the builtin extractor") {
    ModelConfig c = micro_config();
    ModelBundle m(c, 3, 91);
    Tensor fixed_map = random_tensor({1, c.backbone_channels.back(), 4, 2}, RngStream(93));
    m.external_backbone = [&](const Tensor&) { return fixed_map; };
    Tensor img({1, 3, 16, 8}, 0.5);
    Var map = m.backbone_forward(img);
    REQUIRE(bit_equal(map.value(), fixed_map));
    REQUIRE_FALSE(map.requires_grad());
}

TEST_CASE("set_trainable freezes parameter gradients by component") {
    ModelConfig c = micro_config();
    ModelBundle m(c, 3, 95);
    m.set_trainable({Component::Backbone});
    for (auto& p : m.params(Component::Backbone)) REQUIRE(p.var->requires_grad());
    for (auto& p : m.params(Component::Generator)) REQUIRE_FALSE(p.var->requires_grad());
}
