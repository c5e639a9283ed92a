#include "mf/model.hpp"

namespace mf {

void ModelConfig::validate() const {
    if (image_size < 32) throw DomainError("config: image_size must be >= 32");
    if (image_size % 16 != 0) throw DomainError("config: image_size must be a multiple of 16");
    if (width % 4 != 0) throw DomainError("config: width must be divisible by 4");
    if (heads < 1 || width % heads != 0) throw DomainError("config: width must be divisible by heads");
    if (layers < 1) throw DomainError("config: layers must be >= 1");
    if (ffn_hidden < 1) throw DomainError("config: ffn_hidden must be >= 1");
    if (epsilon < 0.0 || epsilon > 1.0) throw DomainError("config: epsilon must lie in [0,1]");
    for (int c : enc_channels)
        if (c < 1) throw DomainError("config: encoder channels must be positive");
}

SodModel::SodModel(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(init_seed);
    EncoderConfig ec;
    ec.image_size = cfg_.image_size;
    ec.channels = cfg_.enc_channels;
    encoder_.init(rng, ec);

    FusionConfig fc;
    fc.strategy = cfg_.strategy;
    fc.width = cfg_.width;
    fc.heads = cfg_.heads;
    fc.layers = cfg_.layers;
    fc.ffn_hidden = cfg_.ffn_hidden;
    fc.epsilon = cfg_.epsilon;
    fc.use_coarse = cfg_.use_coarse;
    fc.token_grids = cfg_.token_grids;
    fc.patch_size = cfg_.patch_size;
    fusion_.init(rng, ec, fc);

    decoder_.init(rng, cfg_.enc_channels);

    encoder_.register_into(reg_, "enc");
    fusion_.register_into(reg_, "fuse");
    decoder_.register_into(reg_, "dec");
}

SodModel::Forward SodModel::forward_t(Tape& t, const SaliencySample& sample) const {
    if (sample.size != cfg_.image_size)
        throw ShapeError("model: sample size " + std::to_string(sample.size) + " does not match configured " +
                         std::to_string(cfg_.image_size));
    Forward f;
    Var rgb = t.constant(sample.rgb);
    Var depth = t.constant(sample.depth);
    f.enc = encoder_forward_t(t, rgb, depth, encoder_);
    f.fused = fusion_.forward_t(t, f.enc.f_r, f.enc.f_d);
    f.dec = decoder_forward_t(t, f.fused, decoder_, cfg_.image_size);
    return f;
}

Matrix SodModel::downsample_mask(const Matrix& mask, int target) {
    Matrix cur = mask;
    while (cur.rows() > target) {
        const int h = cur.rows() / 2, w = cur.cols() / 2;
        Matrix next(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                next(y, x) =
                    (cur(2 * y, 2 * x) + cur(2 * y, 2 * x + 1) + cur(2 * y + 1, 2 * x) + cur(2 * y + 1, 2 * x + 1)) /
                    4.0;
        cur = std::move(next);
    }
    for (double& v : cur.vec()) v = v >= 0.5 ? 1.0 : 0.0;
    return cur;
}

Var SodModel::loss_t(Tape& t, const Forward& f, const SaliencySample& sample, const LossOptions& opts,
                     LossBreakdownVars* breakdown) const {
    const int s = cfg_.image_size;
    const Matrix mask = sample.mask;

    auto as_image = [&](Var v) { return t.reshape(v, s, s); };
    std::vector<Var> per_decoder{
        pixel_position_aware_loss_t(t, as_image(f.dec.pred1), mask, opts.ap_window),
        pixel_position_aware_loss_t(t, as_image(f.dec.pred2), mask, opts.ap_window),
    };
    std::vector<Var> per_level;
    for (int li = 0; li < 4; ++li)
        per_level.push_back(pixel_position_aware_loss_t(t, as_image(f.dec.level_preds[li]), mask, opts.ap_window));

    std::vector<std::pair<Var, Var>> focal_terms;
    for (int li = 0; li < 4; ++li) {
        const int g = s >> (li + 1);
        const Matrix level_mask = downsample_mask(mask, g);
        Var pr = t.reshape(f.enc.p_r[li], g, g);
        Var pd = t.reshape(f.enc.p_d[li], g, g);
        focal_terms.emplace_back(focal_regularization_t(t, pr, pd, level_mask, opts.focal),
                                 focal_regularization_t(t, pd, pr, level_mask, opts.focal));
    }

    LossBreakdownVars parts = total_loss_t(t, per_decoder, per_level, focal_terms, opts.lambda);
    if (breakdown) *breakdown = parts;
    return parts.total;
}

Matrix SodModel::predict(const SaliencySample& sample) const {
    Tape t;
    Forward f = forward_t(t, sample);
    const Matrix& flat = t.val(f.dec.pred2);
    return Matrix(cfg_.image_size, cfg_.image_size, flat.vec());
}

} // namespace mf
