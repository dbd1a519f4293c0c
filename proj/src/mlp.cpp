#include "mml/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mml/numerics.hpp"

namespace mml {

Mlp Mlp::init(const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp: need at least input and output dims");
  Mlp mlp;
  mlp.layers.reserve(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    MlpLayer layer;
    layer.W = Matrix(dims[l], dims[l + 1]);
    const double limit = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (double& v : layer.W.storage()) v = (rng.uniform() * 2.0 - 1.0) * limit;
    layer.b.assign(dims[l + 1], 0.0);
    for (double& v : layer.b) v = (rng.uniform() * 2.0 - 1.0) * limit;
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

ModalityOutputs mlp_forward(const MlpStack& stack, const std::vector<Matrix>& batch,
                            MlpCache* cache) {
  if (batch.size() != stack.nets.size())
    throw std::invalid_argument("mlp_forward: modality count mismatch");
  ModalityOutputs outputs(batch.size());
  if (cache) {
    cache->activations.assign(batch.size(), {});
    cache->outputs.assign(batch.size(), {});
  }
  for (std::size_t m = 0; m < batch.size(); ++m) {
    const Mlp& net = stack.nets[m];
    check_shape(batch[m].cols() == static_cast<std::size_t>(net.input_dim()),
                "mlp_forward: feature dim on modality " + std::to_string(m));
    Matrix h = batch[m];
    if (cache) cache->activations[m].push_back(h);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const MlpLayer& layer = net.layers[l];
      Matrix z = matmul(h, layer.W);
      for (std::size_t i = 0; i < z.rows(); ++i) {
        double* zr = z.row(i);
        for (std::size_t j = 0; j < z.cols(); ++j) zr[j] += layer.b[j];
      }
      if (l + 1 < net.layers.size()) {
        for (double& v : z.storage()) v = v > 0.0 ? v : 0.0;  // ReLU
        if (cache) cache->activations[m].push_back(z);
      } else {
        for (std::size_t i = 0; i < z.rows(); ++i) softmax_inplace(z.row(i), z.cols());
      }
      h = std::move(z);
    }
    if (cache) cache->outputs[m] = h;
    outputs[m] = std::move(h);
  }
  return outputs;
}

MlpGrads mlp_backward(const MlpStack& stack, const MlpCache& cache,
                      const ModalityOutputs& d_outputs) {
  if (d_outputs.size() != stack.nets.size())
    throw std::invalid_argument("mlp_backward: modality count mismatch");
  MlpGrads grads(stack.nets.size());
  for (std::size_t m = 0; m < stack.nets.size(); ++m) {
    const Mlp& net = stack.nets[m];
    const std::size_t L = net.layers.size();
    grads[m].resize(L);

    // softmax head Jacobian: dz_j = p_j (d_j - sum_k d_k p_k)
    const Matrix& p = cache.outputs[m];
    Matrix dz(p.rows(), p.cols());
    for (std::size_t i = 0; i < p.rows(); ++i) {
      const double* pr = p.row(i);
      const double* dr = d_outputs[m].row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < p.cols(); ++j) dot += dr[j] * pr[j];
      double* dzr = dz.row(i);
      for (std::size_t j = 0; j < p.cols(); ++j) dzr[j] = pr[j] * (dr[j] - dot);
    }

    for (std::size_t l = L; l-- > 0;) {
      const Matrix& input = cache.activations[m][l];
      grads[m][l].W = matmul_tn(input, dz);
      grads[m][l].b.assign(net.layers[l].W.cols(), 0.0);
      for (std::size_t i = 0; i < dz.rows(); ++i) {
        const double* dzr = dz.row(i);
        for (std::size_t j = 0; j < dz.cols(); ++j) grads[m][l].b[j] += dzr[j];
      }
      if (l == 0) break;
      Matrix dh = matmul_nt(dz, net.layers[l].W);
      // ReLU mask: the cached activation is the post-ReLU value
      for (std::size_t idx = 0; idx < dh.size(); ++idx)
        if (input.data()[idx] <= 0.0) dh.data()[idx] = 0.0;
      dz = std::move(dh);
    }
  }
  return grads;
}

}  // namespace mml
