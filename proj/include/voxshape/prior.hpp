#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxshape/grid.hpp"
#include "voxshape/nn.hpp"
#include "voxshape/synth.hpp"

namespace voxshape::prior {

// Corruption applied to encoder inputs during denoising training.
struct CorruptionParams {
    double flip_prob = 0.1;   // occupancy bit flips
    double noise_var = 0.05;  // additive Gaussian on the logTSDF channel
};

struct LatentDistribution {
    std::vector<double> mu;
    std::vector<double> logvar;
};

struct LatentCode {
    std::vector<double> z;
};

// Decoder prediction for one shape: occupancy probabilities, logTSDF means
// and the fixed decoder variance.
struct DecoderOutput {
    GridDims dims;
    std::vector<float> occ_prob;
    std::vector<float> sdf_mean;  // logTSDF domain
    double sigma2 = 0.0;
};

ShapeSample corrupt(const ShapeSample& y, const CorruptionParams& cp, std::uint64_t seed);

// z = mu + eps * exp(logvar / 2), one sample.
LatentCode reparameterize(const LatentDistribution& d, std::uint64_t seed);

// 1/2 sum(mu^2 + sigma^2 - 1 - log sigma^2).
double kl_unit_gaussian(const LatentDistribution& d);

inline constexpr double kBceClamp = 1e-7;

// Binary cross-entropy on the occupancy channel plus 1/(2 sigma^2) times the
// squared error on the logTSDF channel.
double reconstruction_loss(const ShapeSample& y, const DecoderOutput& out);

// Encoder/decoder pair sharing one architecture; the unit every trainer and
// baseline loads or stores.
template <class T>
struct VaeModel {
    nn::ArchConfig arch;
    nn::Encoder<T> encoder;
    nn::Decoder<T> decoder;

    static VaeModel make(const nn::ArchConfig& arch, std::uint64_t init_seed);

    std::vector<nn::Param<T>*> params();
    std::vector<nn::Param<T>*> encoder_params();
    std::vector<nn::Param<T>*> decoder_params();
};

void save_model(const std::string& path, VaeModel<float>& model,
                const std::map<std::string, std::string>& meta);
VaeModel<float> load_model(const std::string& path,
                           std::map<std::string, std::string>* meta = nullptr);

// Batched DVAE objective. Runs forward on the corrupted input, reconstructs
// against the clean targets, optionally backpropagates into the live
// parameter gradients. eps supplies the reparameterization noise (batch * Q,
// fixed by the caller so finite differences stay consistent).
struct LossBreakdown {
    double total = 0.0;
    double recon_bce = 0.0;
    double recon_sse = 0.0;
    double kl = 0.0;
};

template <class T>
LossBreakdown dvae_batch_loss(VaeModel<T>& model, const nn::Tensor<T>& corrupted_in,
                              const nn::Tensor<T>& target_occ,
                              const nn::Tensor<T>& target_sdf, const std::vector<T>& eps,
                              double lambda, double sigma2, bool train, bool backprop);

// Spec-level single-sample DVAE loss (eval-mode batchnorm); gradients land
// in the model parameters.
template <class T>
LossBreakdown dvae_loss(VaeModel<T>& model, const ShapeSample& y, const ShapeSample& y_corrupt,
                        double lambda, double sigma2, std::uint64_t eps_seed);

struct PriorConfig {
    std::vector<int> stage_channels = {8, 16, 24};
    int latent = 10;
    int epochs = 400;
    int batch = 16;
    double lambda = 2.0;
    double log_sigma2 = -2.0;  // fixed decoder variance, logTSDF channel
    CorruptionParams corruption;
    int translate_max = 3;
    nn::AdamConfig adam;
    std::uint64_t seed = 0;
    std::string resume_checkpoint;  // optional: continue step numbering
};

struct TrainReport {
    std::int64_t steps = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

// Minibatch Adam on the DVAE loss with random-translation augmentation and
// input corruption. Writes the checkpoint and an append-only step log.
TrainReport train_prior(const DatasetManifest& manifest, const PriorConfig& config,
                        const std::string& checkpoint_path, const std::string& log_path);

// Decodes n standard-normal latent draws (eval mode).
std::vector<DecoderOutput> sample_prior(int n, VaeModel<float>& model, std::uint64_t seed);

// decode(mean of encode(y)); deterministic.
DecoderOutput reconstruct(const ShapeSample& y, VaeModel<float>& model);

// Tensor assembly shared with the inference-side trainers.
nn::Tensor<float> shape_batch_input(const std::vector<const ShapeSample*>& batch);
DecoderOutput decoder_output_from_tensors(const nn::Tensor<float>& occ,
                                          const nn::Tensor<float>& sdf, int batch_index,
                                          const GridDims& dims, double sigma2);
ShapeSample translate_sample(const ShapeSample& y, int dh, int dw, int dd);

}  // namespace voxshape::prior
