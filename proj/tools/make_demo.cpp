// Writes the bundled demo dataset: n = 200, one intercept plus two baseline
// covariates, 40 restricted controls, sparse gamma with l1 norm 1.
#include "biasaware/model.hpp"
#include "biasaware/simharness.hpp"

#include <iostream>

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_demo OUT.csv\n";
    return 2;
  }
  biasaware::DGPSpec spec;
  spec.n = 200;
  spec.k1 = 3;
  spec.k2 = 40;
  spec.beta = 0.5;
  spec.gamma_style = biasaware::GammaStyle::Sparse;
  spec.sparse_s = 5;
  spec.gamma_C = 1.0;
  spec.error_scale = biasaware::ErrorScale::HeteroByW;
  spec.seed = 7;
  auto draw = biasaware::generate(spec);
  draw.data.y_name = "y";
  draw.data.w_name = "w";
  biasaware::write_dataset_csv(draw.data, argv[1]);
  return 0;
}
