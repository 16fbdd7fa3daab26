#pragma once

#include "cmatch/layers.hpp"
#include "cmatch/numkit.hpp"
#include "cmatch/textprep.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace cmatch {

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t dim = 64;
    std::size_t layers = 4;
    std::size_t classes = 7;
    std::size_t max_seq_len = 64;

    /// Throws ConfigError unless dim >= 8, layers >= 2, classes >= 2 and vocab_size >= 2.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Pooled sentence vectors after encoder layer `layer` (0 = pooled embeddings).
struct HiddenState {
    std::size_t layer = 0;
    Tensor2D values; // batch x dim
};

struct ForwardOutput {
    Tensor2D probs;                  // batch x classes
    std::vector<HiddenState> hidden; // layers + 1 entries, hidden[m].layer == m
};

/// One interpolated row: lambda * h[left] + (1 - lambda) * h[right].
struct MixPair {
    std::size_t left = 0;
    std::size_t right = 0;
    double lambda = 1.0;
};

struct MixSpec {
    std::size_t layer = 0;
    std::vector<MixPair> pairs;
};

/// Residual encoder block: h + tanh(W h + b).
class EncoderBlock {
public:
    EncoderBlock() = default;
    EncoderBlock(const std::string& name, std::size_t dim) : affine(name, dim, dim) {}

    Tensor2D forward(const Tensor2D& h);
    Tensor2D apply(const Tensor2D& h) const;
    Tensor2D backward(const Tensor2D& grad_out);

    Affine affine;

private:
    TanhActivation activation_;
    ResidualAdd residual_;
};

/// Embedding, masked mean pooling, `layers` residual encoder blocks and a
/// softmax classification head. Hidden states are pooled per sentence, so
/// interpolation at layer m mixes sentence vectors.
class LayeredClassifier {
public:
    LayeredClassifier() = default;
    /// Embeddings and weights ~ uniform(-0.08, 0.08), biases zero.
    LayeredClassifier(const ModelConfig& config, std::uint64_t init_seed);

    const ModelConfig& config() const { return config_; }

    /// Inference pass capturing every hidden state.
    ForwardOutput forward(std::span<const EncodedText> batch) const;
    Tensor2D predict(std::span<const EncodedText> batch) const;
    /// Runs encoder blocks m+1..L and the head on `h`.
    Tensor2D forward_from_layer(std::size_t m, const HiddenState& h) const;

    /// Training pass that records a tape for `backward`. With a mix spec the
    /// batch is encoded up to `mix.layer`, rows are interpolated per `mix.pairs`
    /// and the forward resumes from there; the output then has one row per pair.
    Tensor2D train_forward(std::span<const EncodedText> batch,
                           const std::optional<MixSpec>& mix = std::nullopt);
    /// Backpropagates d(loss)/d(probs) through the recorded tape, accumulating
    /// parameter gradients. Mixed rows send lambda and 1 - lambda of their
    /// gradient to the left and right operands.
    void backward(const Tensor2D& grad_probs);

    std::vector<ParamSlot*> params();
    std::vector<const ParamSlot*> params() const;
    void zero_grad();

    void save(std::ostream& out) const;
    static LayeredClassifier load(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static LayeredClassifier load(const std::filesystem::path& path);

private:
    struct PackedBatch {
        std::vector<std::int32_t> ids;
        std::vector<std::size_t> offsets;
    };
    PackedBatch pack(std::span<const EncodedText> batch) const;
    Tensor2D embed_and_pool(std::span<const EncodedText> batch) const;

    ModelConfig config_;
    EmbeddingLookup embedding_;
    MeanPool pool_;
    std::vector<EncoderBlock> blocks_;
    Affine head_;
    SoftmaxHead softmax_;

    struct Tape {
        std::optional<MixSpec> mix;
        std::size_t prefix_rows = 0;
    };
    std::optional<Tape> tape_;
};

/// Interpolates rows of `h` per `pairs`.
Tensor2D mix_rows(const Tensor2D& h, std::span<const MixPair> pairs);

} // namespace cmatch
