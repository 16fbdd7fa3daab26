#include "cmatch/model.hpp"

#include "cmatch/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cmatch {

namespace {

constexpr double kInitRange = 0.08;
constexpr const char* kCheckpointMagic = "cmatch-checkpoint";
constexpr int kCheckpointVersion = 1;

} // namespace

void ModelConfig::validate() const {
    if (dim < 8) {
        throw ConfigError("model: dim must be >= 8, got " + std::to_string(dim));
    }
    if (layers < 2) {
        throw ConfigError("model: layers must be >= 2, got " + std::to_string(layers));
    }
    if (classes < 2) {
        throw ConfigError("model: classes must be >= 2, got " + std::to_string(classes));
    }
    if (vocab_size < 2) {
        throw ConfigError("model: vocab_size must be >= 2");
    }
    if (max_seq_len < 1) {
        throw ConfigError("model: max_seq_len must be >= 1");
    }
}

Tensor2D EncoderBlock::forward(const Tensor2D& h) {
    const Tensor2D pre = affine.forward(h);
    const Tensor2D act = activation_.forward(pre);
    return residual_.forward(h, act);
}

Tensor2D EncoderBlock::apply(const Tensor2D& h) const {
    return ResidualAdd::apply(h, TanhActivation::apply(affine.apply(h)));
}

Tensor2D EncoderBlock::backward(const Tensor2D& grad_out) {
    auto [skip, through] = residual_.backward(grad_out);
    const Tensor2D d_pre = activation_.backward(through);
    const Tensor2D d_in = affine.backward(d_pre);
    for (std::size_t i = 0; i < skip.size(); ++i) {
        skip.data()[i] += d_in.data()[i];
    }
    return skip;
}

LayeredClassifier::LayeredClassifier(const ModelConfig& config, std::uint64_t init_seed)
    : config_(config), embedding_("embedding", config.vocab_size, config.dim),
      head_("head", config.dim, config.classes) {
    config_.validate();
    std::mt19937_64 rng(init_seed);
    init_uniform(embedding_.table.value, kInitRange, rng);
    blocks_.reserve(config.layers);
    for (std::size_t l = 0; l < config.layers; ++l) {
        blocks_.emplace_back("block" + std::to_string(l + 1), config.dim);
        init_uniform(blocks_.back().affine.weight.value, kInitRange, rng);
    }
    init_uniform(head_.weight.value, kInitRange, rng);
}

LayeredClassifier::PackedBatch LayeredClassifier::pack(std::span<const EncodedText> batch) const {
    PackedBatch packed;
    packed.offsets.reserve(batch.size() + 1);
    packed.offsets.push_back(0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const EncodedText& text = batch[b];
        if (text.length < 1 || text.length > text.ids.size()) {
            throw std::invalid_argument("model: example " + std::to_string(b) +
                                        " has invalid length");
        }
        for (std::size_t i = 0; i < text.length; ++i) {
            const std::int32_t id = text.ids[i];
            if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
                throw std::out_of_range("model: example " + std::to_string(b) + " token id " +
                                        std::to_string(id) + " outside vocabulary of size " +
                                        std::to_string(config_.vocab_size));
            }
            packed.ids.push_back(id);
        }
        packed.offsets.push_back(packed.ids.size());
    }
    return packed;
}

Tensor2D LayeredClassifier::embed_and_pool(std::span<const EncodedText> batch) const {
    const PackedBatch packed = pack(batch);
    return MeanPool::apply(embedding_.apply(packed.ids), packed.offsets);
}

ForwardOutput LayeredClassifier::forward(std::span<const EncodedText> batch) const {
    ForwardOutput out;
    out.hidden.reserve(blocks_.size() + 1);
    out.hidden.push_back({0, embed_and_pool(batch)});
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        out.hidden.push_back({l + 1, blocks_[l].apply(out.hidden.back().values)});
    }
    out.probs = SoftmaxHead::apply(head_.apply(out.hidden.back().values));
    return out;
}

Tensor2D LayeredClassifier::predict(std::span<const EncodedText> batch) const {
    Tensor2D h = embed_and_pool(batch);
    for (const EncoderBlock& block : blocks_) {
        h = block.apply(h);
    }
    return SoftmaxHead::apply(head_.apply(h));
}

Tensor2D LayeredClassifier::forward_from_layer(std::size_t m, const HiddenState& h) const {
    if (m > blocks_.size()) {
        throw std::out_of_range("forward_from_layer: layer " + std::to_string(m) +
                                " beyond encoder depth " + std::to_string(blocks_.size()));
    }
    if (h.layer != m) {
        throw std::invalid_argument("forward_from_layer: hidden state is from layer " +
                                    std::to_string(h.layer) + ", expected " + std::to_string(m));
    }
    if (h.values.cols() != config_.dim) {
        throw std::invalid_argument("forward_from_layer: hidden width mismatch");
    }
    Tensor2D x = h.values;
    for (std::size_t l = m; l < blocks_.size(); ++l) {
        x = blocks_[l].apply(x);
    }
    return SoftmaxHead::apply(head_.apply(x));
}

Tensor2D mix_rows(const Tensor2D& h, std::span<const MixPair> pairs) {
    Tensor2D out(pairs.size(), h.cols());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const MixPair& p = pairs[i];
        if (p.left >= h.rows() || p.right >= h.rows()) {
            throw std::out_of_range("mix: pair " + std::to_string(i) + " references row outside batch");
        }
        const double a = p.lambda;
        const double b = 1.0 - p.lambda;
        for (std::size_t c = 0; c < h.cols(); ++c) {
            out(i, c) = a * h(p.left, c) + b * h(p.right, c);
        }
    }
    return out;
}

Tensor2D LayeredClassifier::train_forward(std::span<const EncodedText> batch,
                                          const std::optional<MixSpec>& mix) {
    const std::size_t depth = blocks_.size();
    if (mix && mix->layer > depth) {
        throw std::out_of_range("train_forward: mix layer " + std::to_string(mix->layer) +
                                " beyond encoder depth");
    }
    tape_.reset();
    const PackedBatch packed = pack(batch);
    Tensor2D h = pool_.forward(embedding_.forward(packed.ids), packed.offsets);
    const std::size_t split = mix ? mix->layer : depth;
    for (std::size_t l = 0; l < split; ++l) {
        h = blocks_[l].forward(h);
    }
    Tape tape{mix, batch.size()};
    if (mix) {
        h = mix_rows(h, mix->pairs);
    }
    for (std::size_t l = split; l < depth; ++l) {
        h = blocks_[l].forward(h);
    }
    Tensor2D probs = softmax_.forward(head_.forward(h));
    tape_ = std::move(tape);
    return probs;
}

void LayeredClassifier::backward(const Tensor2D& grad_probs) {
    if (!tape_) {
        throw std::logic_error("model: backward called without a training forward");
    }
    const std::size_t depth = blocks_.size();
    const std::size_t split = tape_->mix ? tape_->mix->layer : depth;
    Tensor2D g = head_.backward(softmax_.backward(grad_probs));
    for (std::size_t l = depth; l-- > split;) {
        g = blocks_[l].backward(g);
    }
    if (tape_->mix) {
        Tensor2D scattered(tape_->prefix_rows, g.cols());
        const auto& pairs = tape_->mix->pairs;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const double a = pairs[i].lambda;
            const double b = 1.0 - pairs[i].lambda;
            for (std::size_t c = 0; c < g.cols(); ++c) {
                scattered(pairs[i].left, c) += a * g(i, c);
                scattered(pairs[i].right, c) += b * g(i, c);
            }
        }
        g = std::move(scattered);
    }
    for (std::size_t l = split; l-- > 0;) {
        g = blocks_[l].backward(g);
    }
    embedding_.backward(pool_.backward(g));
    tape_.reset();
}

std::vector<ParamSlot*> LayeredClassifier::params() {
    std::vector<ParamSlot*> out{&embedding_.table};
    for (EncoderBlock& block : blocks_) {
        out.push_back(&block.affine.weight);
        out.push_back(&block.affine.bias);
    }
    out.push_back(&head_.weight);
    out.push_back(&head_.bias);
    return out;
}

std::vector<const ParamSlot*> LayeredClassifier::params() const {
    auto mutable_params = const_cast<LayeredClassifier*>(this)->params();
    return {mutable_params.begin(), mutable_params.end()};
}

void LayeredClassifier::zero_grad() {
    for (ParamSlot* p : params()) {
        p->zero_grad();
    }
}

void LayeredClassifier::save(std::ostream& out) const {
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    out << "config " << config_.vocab_size << ' ' << config_.dim << ' ' << config_.layers << ' '
        << config_.classes << ' ' << config_.max_seq_len << '\n';
    out << std::hexfloat;
    for (const ParamSlot* p : params()) {
        out << "tensor " << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
        for (std::size_t r = 0; r < p->value.rows(); ++r) {
            for (std::size_t c = 0; c < p->value.cols(); ++c) {
                out << (c ? " " : "") << p->value(r, c);
            }
            out << '\n';
        }
    }
    out << std::defaultfloat << "end\n";
}

LayeredClassifier LayeredClassifier::load(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kCheckpointMagic) {
        throw DataError("checkpoint: missing header");
    }
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    std::string word;
    ModelConfig cfg;
    if (!(in >> word >> cfg.vocab_size >> cfg.dim >> cfg.layers >> cfg.classes >> cfg.max_seq_len) ||
        word != "config") {
        throw DataError("checkpoint: bad config line");
    }
    LayeredClassifier model(cfg, 0);
    for (ParamSlot* p : model.params()) {
        std::string name;
        std::size_t rows = 0, cols = 0;
        if (!(in >> word >> name >> rows >> cols) || word != "tensor") {
            throw DataError("checkpoint: expected tensor record for " + p->name);
        }
        if (name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
            throw DataError("checkpoint: tensor " + name + " does not match model layout");
        }
        for (double& v : p->value.values()) {
            std::string token;
            if (!(in >> token)) {
                throw DataError("checkpoint: truncated tensor " + name);
            }
            char* end = nullptr;
            v = std::strtod(token.c_str(), &end);
            if (end == token.c_str() || *end != '\0') {
                throw DataError("checkpoint: bad value '" + token + "' in " + name);
            }
        }
    }
    if (!(in >> word) || word != "end") {
        throw DataError("checkpoint: missing end marker");
    }
    return model;
}

void LayeredClassifier::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write checkpoint " + path.string());
    }
    save(out);
}

LayeredClassifier LayeredClassifier::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open checkpoint " + path.string());
    }
    return load(in);
}

} // namespace cmatch
