#pragma once

#include <cstdint>

#include "snnforge/ann.hpp"
#include "snnforge/data.hpp"

namespace snnforge {

struct SynthBenchmark {
    AnnModel ann;
    Dataset dataset;
};

// The uniform-input setting the optimal-shift derivation assumes: an analyzed
// dense layer with identity weights and threshold ReLU at y_th = v_th, so its
// pre-activations are i.i.d. uniform on [0, v_th], followed by a fixed linear
// two-class readout (thresholded-sum labels keep the accuracy well-defined
// while adding no nonlinearity of its own).
SynthBenchmark synth_uniform_benchmark(std::size_t n_samples, std::size_t width, double v_th,
                                       std::uint64_t seed);

struct ExactGridFixture {
    AnnModel ann;
    Dataset eval_set;   // single input whose pre-activations are exact k/T grid points
    Dataset calib_set;  // eval input plus a saturating input that pins v_th = y_th exactly
    int T = 8;
};

// Hand-built dyadic network: every pre-activation on the eval input is a
// positive multiple of v_th/T below v_th, so conversion without shift followed
// by simulation at length T reproduces the ANN bit-for-bit.
ExactGridFixture exact_grid_fixture();

struct BlobsDatasets {
    Dataset train;
    Dataset test;
};

// Desk-scale multi-class task: class means on a ring in a 2-d latent space,
// Gaussian latent noise, embedded into `dim` pixels through a fixed random
// projection and clamped into [0,1]. latent_sigma controls the Bayes error.
// A seeded fraction of samples is scaled radially by outlier_scale (label
// preserved), giving the activation distribution the heavy tail that makes
// unbounded ReLU activations expensive to convert.
BlobsDatasets synth_blobs(std::size_t n_train, std::size_t n_test, std::size_t dim,
                          int n_classes, double latent_sigma, double pixel_sigma,
                          std::uint64_t seed, double outlier_rate = 0.0,
                          double outlier_scale = 1.0);

}  // namespace snnforge
