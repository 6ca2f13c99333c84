#ifndef EFPRUNE_ELECTROSTATICS_HPP
#define EFPRUNE_ELECTROSTATICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "efprune/model.hpp"

namespace efprune {

inline constexpr double kCoulombConstant = 8.99e9;

// Relative floor applied to the charge-space distance before squaring:
// r_min = kDistanceFloor * max(|q_source|, 1).
inline constexpr double kDistanceFloor = 1e-3;

struct FilterCharge {
    int sign = 0;            // in {-1, 0, +1}
    double magnitude = 0.0;  // L1 norm of the filter weights
    double charge = 0.0;     // sign * magnitude

    bool neutral() const noexcept { return sign == 0; }
};

// Charges, source filter, distances and forces of one prunable conv layer,
// frozen at the moment it was computed.
struct LayerForceField {
    std::vector<FilterCharge> charges;
    Index source_index = 0;
    double source_charge = 0.0;
    std::vector<double> distances;
    std::vector<double> forces;
    double coulomb_constant = kCoulombConstant;
    std::int64_t timestamp = 0;

    // |q_source|: absolute charge of the source, 0 when the largest filter is neutral.
    double source_magnitude() const { return std::abs(source_charge); }
    // Largest L1 norm in the layer (the source's norm, charged or not).
    double max_l1() const { return charges.empty() ? 0.0 : charges[static_cast<std::size_t>(source_index)].magnitude; }
    double total_force() const {
        double s = 0.0;
        for (double f : forces) s += f;
        return s;
    }
};

template <typename Derived>
double filter_magnitude(const Eigen::MatrixBase<Derived>& weights) {
    return weights.template cast<double>().cwiseAbs().sum();
}

// Sign of the sum of elementwise signs; zero entries contribute 0.
template <typename Derived>
int filter_sign(const Eigen::MatrixBase<Derived>& weights) {
    using S = typename Derived::Scalar;
    std::int64_t votes = 0;
    for (Index i = 0; i < weights.size(); ++i) {
        const S w = weights.derived().coeff(i);
        votes += (w > S(0)) - (w < S(0));
    }
    return (votes > 0) - (votes < 0);
}

template <typename Derived>
FilterCharge charge(const Eigen::MatrixBase<Derived>& weights) {
    FilterCharge q;
    q.sign = filter_sign(weights);
    q.magnitude = filter_magnitude(weights);
    q.charge = q.sign * q.magnitude;
    return q;
}

template <typename Scalar>
FilterCharge charge(const Tensor<Scalar>& filter) {
    return charge(filter.data());
}

// Index of the largest magnitude; the lowest index wins ties.
inline Index select_source(const std::vector<FilterCharge>& charges) {
    Index best = 0;
    for (std::size_t n = 1; n < charges.size(); ++n)
        if (charges[n].magnitude > charges[static_cast<std::size_t>(best)].magnitude) best = static_cast<Index>(n);
    return best;
}

inline double distance(double q_source, double q_n) { return std::abs(q_source - q_n); }

inline double distance_floor(double source_magnitude) { return kDistanceFloor * std::max(source_magnitude, 1.0); }

inline double clamped_distance(const FilterCharge& source, const FilterCharge& q_n) {
    return std::max(distance(source.charge, q_n.charge), distance_floor(std::abs(source.charge)));
}

// Force magnitude on filter n. Zero for the source itself and for neutral filters.
// Uses |q_source| = |charge|, so a neutral source exerts no force.
inline double force(const FilterCharge& source, const FilterCharge& q_n, Index n, Index source_index,
                    double coulomb_constant = kCoulombConstant) {
    if (n == source_index || q_n.neutral()) return 0.0;
    const double r = clamped_distance(source, q_n);
    return coulomb_constant * std::abs(source.charge) * q_n.magnitude / (r * r);
}

template <typename Scalar>
LayerForceField layer_force_field(const Conv2d<Scalar>& layer, double coulomb_constant = kCoulombConstant,
                                  std::int64_t timestamp = 0) {
    if (!layer.prunable) throw ConfigError(layer.name + " is not a prunable layer");
    const Index filters = layer.filters();
    LayerForceField field;
    field.coulomb_constant = coulomb_constant;
    field.timestamp = timestamp;
    field.charges.reserve(static_cast<std::size_t>(filters));
    const auto rows = layer.weight.rows();
    for (Index n = 0; n < filters; ++n) field.charges.push_back(charge(rows.row(n)));
    field.source_index = select_source(field.charges);
    const FilterCharge& source = field.charges[static_cast<std::size_t>(field.source_index)];
    field.source_charge = source.charge;
    field.distances.resize(static_cast<std::size_t>(filters));
    field.forces.resize(static_cast<std::size_t>(filters));
    for (Index n = 0; n < filters; ++n) {
        const auto& q = field.charges[static_cast<std::size_t>(n)];
        field.distances[static_cast<std::size_t>(n)] = distance(source.charge, q.charge);
        field.forces[static_cast<std::size_t>(n)] = force(source, q, n, field.source_index, coulomb_constant);
    }
    return field;
}

template <typename Scalar>
std::vector<LayerForceField> model_force_fields(const Model<Scalar>& model, double coulomb_constant = kCoulombConstant,
                                                std::int64_t timestamp = 0) {
    std::vector<LayerForceField> fields;
    for (const auto* conv : model.prunable_convs())
        fields.push_back(layer_force_field(*conv, coulomb_constant, timestamp));
    return fields;
}

// Sum of force magnitudes over every prunable layer (the unweighted penalty).
template <typename Scalar>
double penalty(const Model<Scalar>& model, double coulomb_constant = kCoulombConstant) {
    const auto prunable = model.prunable_convs();
    if (prunable.empty()) throw ConfigError("penalty requires at least one prunable layer");
    double total = 0.0;
    for (const auto* conv : prunable) total += layer_force_field(*conv, coulomb_constant).total_force();
    return total;
}

// Penalty term of the regularized gradient for one layer:
//   alpha_e * k_e * |q_source| / max(r_n, r_min)^2 * sign(w)
// with |q_source|, r_n and the filter's own sign frozen from `field`.
template <typename Scalar>
Tensor<Scalar> penalty_gradient(const Conv2d<Scalar>& layer, const LayerForceField& field, double alpha_e,
                                double coulomb_constant) {
    Tensor<Scalar> grad(layer.weight.shape());
    const Index filters = layer.filters();
    if (static_cast<Index>(field.charges.size()) != filters)
        throw DimensionError(layer.name, "force field has " + std::to_string(field.charges.size()) +
                                             " filters, layer has " + std::to_string(filters));
    const double source_magnitude = field.source_magnitude();
    const double r_min = distance_floor(source_magnitude);
    auto out = grad.rows();
    const auto w = layer.weight.rows();
    for (Index n = 0; n < filters; ++n) {
        const auto& q = field.charges[static_cast<std::size_t>(n)];
        if (n == field.source_index || q.neutral()) continue;
        const double r = std::max(field.distances[static_cast<std::size_t>(n)], r_min);
        const Scalar coeff = static_cast<Scalar>(alpha_e * coulomb_constant * source_magnitude / (r * r));
        out.row(n) = w.row(n).unaryExpr([coeff](Scalar v) { return coeff * Scalar((v > Scalar(0)) - (v < Scalar(0))); });
    }
    return grad;
}

} // namespace efprune

#endif // EFPRUNE_ELECTROSTATICS_HPP
