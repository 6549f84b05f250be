#include "mdgp/kernel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "mdgp/error.hpp"

namespace mdgp {

// ---------------------------------------------------------------------------
// CovariateSpace
// ---------------------------------------------------------------------------

namespace {

const std::string &dim_name(const DimSpec &d) {
  return std::visit([](const auto &v) -> const std::string & { return v.name; },
                    d);
}

}  // namespace

CovariateSpace::CovariateSpace(std::vector<DimSpec> dims)
    : dims_(std::move(dims)) {
  std::set<std::string> seen;
  for (const auto &d : dims_) {
    const auto &name = dim_name(d);
    if (name.empty()) throw InvalidArgument("covariate with empty name");
    if (!seen.insert(name).second)
      throw InvalidArgument("duplicate covariate name '" + name + "'");
    if (const auto *c = std::get_if<CategoricalDim>(&d)) {
      if (c->num_categories() < 2)
        throw InvalidArgument("categorical covariate '" + name +
                              "' needs at least 2 categories");
      std::set<std::string> labels(c->labels.begin(), c->labels.end());
      if (labels.size() != c->labels.size())
        throw InvalidArgument("duplicate level labels in '" + name + "'");
    } else {
      const auto &x = std::get<ContinuousDim>(d);
      if (!(x.observed_min < x.observed_max))
        throw InvalidArgument("continuous covariate '" + name +
                              "' needs observed_min < observed_max");
    }
  }
}

const std::string &CovariateSpace::name(std::size_t i) const {
  return dim_name(dims_.at(i));
}

bool CovariateSpace::is_continuous(std::size_t i) const {
  return std::holds_alternative<ContinuousDim>(dims_.at(i));
}

std::size_t CovariateSpace::num_categories(std::size_t i) const {
  const auto *c = std::get_if<CategoricalDim>(&dims_.at(i));
  if (c == nullptr)
    throw InvalidArgument("covariate '" + name(i) + "' is not categorical");
  return c->num_categories();
}

std::optional<std::size_t> CovariateSpace::find(std::string_view name) const {
  for (std::size_t i = 0; i < dims_.size(); ++i)
    if (dim_name(dims_[i]) == name) return i;
  return std::nullopt;
}

std::size_t CovariateSpace::index_of(std::string_view name) const {
  auto i = find(name);
  if (!i) throw FormulaError("unknown covariate '" + std::string(name) + "'");
  return *i;
}

std::optional<int> CovariateSpace::level_of(std::size_t i,
                                            std::string_view label) const {
  const auto *c = std::get_if<CategoricalDim>(&dims_.at(i));
  if (c == nullptr) return std::nullopt;
  for (std::size_t k = 0; k < c->labels.size(); ++k)
    if (c->labels[k] == label) return static_cast<int>(k);
  return std::nullopt;
}

void CovariateSpace::validate_point(std::span<const double> x) const {
  if (x.size() != dims_.size())
    throw DimensionError("point has " + std::to_string(x.size()) +
                         " coordinates, space has " +
                         std::to_string(dims_.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]))
      throw DimensionError("non-finite coordinate for '" + name(i) + "'");
    if (is_categorical(i)) {
      int v = level_index(x[i]);
      if (v < 0 || static_cast<std::size_t>(v) >= num_categories(i))
        throw DimensionError("level out of range for '" + name(i) + "'");
    }
  }
}

int level_index(double coordinate) {
  double r = std::round(coordinate);
  if (std::abs(r - coordinate) > 1e-9)
    throw DimensionError("categorical coordinate is not an integer level");
  return static_cast<int>(r);
}

// ---------------------------------------------------------------------------
// Base kernels
// ---------------------------------------------------------------------------

CompoundSymmetryKernel make_compound_symmetry(std::size_t dim, std::size_t C,
                                              double variance,
                                              double covariance) {
  if (C < 2) throw InvalidArgument("compound symmetry needs C >= 2");
  if (!(variance >= 0.0))
    throw InvalidArgument("compound symmetry variance must be >= 0");
  const double lower = -variance / static_cast<double>(C - 1);
  const double slack = 1e-12 * std::max(1.0, variance);
  if (covariance < lower - slack || covariance > variance + slack)
    throw InvalidArgument(
        "compound symmetry covariance must lie in [-variance/(C-1), "
        "variance]");
  return {dim, C, variance, covariance};
}

MaskKernel make_mask(std::size_t dim, std::size_t C, std::vector<int> masked) {
  if (C < 2) throw InvalidArgument("mask kernel needs C >= 2");
  std::sort(masked.begin(), masked.end());
  masked.erase(std::unique(masked.begin(), masked.end()), masked.end());
  for (int m : masked)
    if (m < 0 || static_cast<std::size_t>(m) >= C)
      throw InvalidArgument("masked level out of range");
  return {dim, C, std::move(masked)};
}

CustomKernel make_custom(std::size_t dim, Eigen::MatrixXd matrix) {
  if (matrix.rows() != matrix.cols() || matrix.rows() < 2)
    throw InvalidArgument("custom categorical kernel must be square, C >= 2");
  if (!matrix.allFinite())
    throw InvalidArgument("custom categorical kernel has non-finite entries");
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument("custom categorical kernel must be symmetric");
  return {dim, std::move(matrix)};
}

std::size_t kernel_dim(const CategoricalKernel &kernel) {
  return std::visit([](const auto &k) { return k.dim; }, kernel);
}

std::size_t num_categories(const CategoricalKernel &kernel) {
  struct Visitor {
    std::size_t operator()(const ZeroSumKernel &k) const {
      return k.num_categories;
    }
    std::size_t operator()(const CompoundSymmetryKernel &k) const {
      return k.num_categories;
    }
    std::size_t operator()(const MaskKernel &k) const {
      return k.num_categories;
    }
    std::size_t operator()(const CustomKernel &k) const {
      return static_cast<std::size_t>(k.matrix.rows());
    }
  };
  return std::visit(Visitor{}, kernel);
}

double categorical_value(const CategoricalKernel &kernel, int v, int w) {
  struct Visitor {
    int v, w;
    double operator()(const ZeroSumKernel &k) const {
      return v == w ? 1.0 : -1.0 / static_cast<double>(k.num_categories - 1);
    }
    double operator()(const CompoundSymmetryKernel &k) const {
      return v == w ? k.variance : k.covariance;
    }
    double operator()(const MaskKernel &k) const {
      auto masked = [&](int level) {
        return std::binary_search(k.masked.begin(), k.masked.end(), level);
      };
      return (masked(v) || masked(w)) ? 0.0 : 1.0;
    }
    double operator()(const CustomKernel &k) const { return k.matrix(v, w); }
  };
  return std::visit(Visitor{v, w}, kernel);
}

Eigen::MatrixXd categorical_matrix(const CategoricalKernel &kernel) {
  const auto C = static_cast<Eigen::Index>(num_categories(kernel));
  Eigen::MatrixXd out(C, C);
  for (Eigen::Index v = 0; v < C; ++v)
    for (Eigen::Index w = 0; w < C; ++w)
      out(v, w) =
          categorical_value(kernel, static_cast<int>(v), static_cast<int>(w));
  return out;
}

double eq_value(double x, double x_prime, double lengthscale) {
  const double r = (x - x_prime) / lengthscale;
  return std::exp(-0.5 * r * r);
}

// ---------------------------------------------------------------------------
// KernelExpr
// ---------------------------------------------------------------------------

KernelExpr::KernelExpr(CovariateSpace space, std::vector<KernelTerm> terms,
                       std::string response)
    : space_(std::move(space)),
      terms_(std::move(terms)),
      response_(std::move(response)) {
  if (terms_.empty()) throw FormulaError("kernel has no terms");
  for (std::size_t j = 0; j < terms_.size(); ++j) {
    const auto &t = terms_[j];
    if (t.num_factors() == 0)
      throw FormulaError("term " + std::to_string(j + 1) + " has no factors");
    std::set<std::size_t> dims;
    for (const auto &e : t.continuous) {
      if (e.dim >= space_.size() || !space_.is_continuous(e.dim))
        throw FormulaError("gp() factor needs a continuous covariate");
      if (!dims.insert(e.dim).second)
        throw FormulaError("covariate '" + space_.name(e.dim) +
                           "' appears twice in one term");
    }
    for (const auto &c : t.categorical) {
      const auto d = kernel_dim(c);
      if (d >= space_.size() || !space_.is_categorical(d))
        throw FormulaError("categorical factor needs a categorical covariate");
      if (num_categories(c) != space_.num_categories(d))
        throw FormulaError("categorical factor on '" + space_.name(d) +
                           "' has the wrong number of categories");
      if (!dims.insert(d).second)
        throw FormulaError("covariate '" + space_.name(d) +
                           "' appears twice in one term");
    }
  }
}

std::size_t KernelExpr::num_lengthscales() const {
  std::size_t n = 0;
  for (const auto &t : terms_) n += t.continuous.size();
  return n;
}

// ---------------------------------------------------------------------------
// HyperParams
// ---------------------------------------------------------------------------

HyperParams HyperParams::unit(const KernelExpr &expr) {
  HyperParams theta;
  for (const auto &t : expr.terms()) {
    theta.magnitude.push_back(1.0);
    theta.lengthscale.emplace_back(t.continuous.size(), 1.0);
  }
  return theta;
}

void HyperParams::validate(const KernelExpr &expr) const {
  if (magnitude.size() != expr.num_terms() ||
      lengthscale.size() != expr.num_terms())
    throw InvalidArgument("hyperparameters do not match number of terms");
  for (std::size_t j = 0; j < expr.num_terms(); ++j) {
    if (!(magnitude[j] > 0.0) || !std::isfinite(magnitude[j]))
      throw InvalidArgument("magnitude must be positive");
    if (lengthscale[j].size() != expr.term(j).continuous.size())
      throw InvalidArgument("lengthscales do not match continuous factors");
    for (double l : lengthscale[j])
      if (!(l > 0.0) || !std::isfinite(l))
        throw InvalidArgument("lengthscale must be positive");
  }
}

std::vector<double> HyperParams::pack_kernel() const {
  std::vector<double> out;
  for (std::size_t j = 0; j < magnitude.size(); ++j) {
    out.push_back(magnitude[j]);
    for (double l : lengthscale.at(j)) out.push_back(l);
  }
  return out;
}

HyperParams HyperParams::unpack_kernel(const KernelExpr &expr,
                                       std::span<const double> packed) {
  HyperParams theta;
  std::size_t k = 0;
  for (const auto &t : expr.terms()) {
    if (k + 1 + t.continuous.size() > packed.size())
      throw InvalidArgument("packed kernel parameters too short");
    theta.magnitude.push_back(packed[k++]);
    std::vector<double> ls;
    for (std::size_t q = 0; q < t.continuous.size(); ++q)
      ls.push_back(packed[k++]);
    theta.lengthscale.push_back(std::move(ls));
  }
  if (k != packed.size())
    throw InvalidArgument("packed kernel parameters too long");
  return theta;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

double eval_term(const KernelExpr &expr, std::size_t j,
                 const HyperParams &theta, std::span<const double> x,
                 std::span<const double> x_prime) {
  const auto &t = expr.term(j);
  double value = theta.magnitude.at(j) * theta.magnitude.at(j);
  for (std::size_t q = 0; q < t.continuous.size(); ++q) {
    const auto d = t.continuous[q].dim;
    value *= eq_value(x[d], x_prime[d], theta.lengthscale.at(j).at(q));
  }
  for (const auto &c : t.categorical) {
    const auto d = kernel_dim(c);
    value *= categorical_value(c, level_index(x[d]), level_index(x_prime[d]));
  }
  return value;
}

double eval_kernel(const KernelExpr &expr, const HyperParams &theta,
                   std::span<const double> x,
                   std::span<const double> x_prime) {
  expr.space().validate_point(x);
  expr.space().validate_point(x_prime);
  double sum = 0.0;
  for (std::size_t j = 0; j < expr.num_terms(); ++j)
    sum += eval_term(expr, j, theta, x, x_prime);
  return sum;
}

// ---------------------------------------------------------------------------
// Formula parsing
// ---------------------------------------------------------------------------

namespace {

class FormulaParser {
 public:
  FormulaParser(std::string_view text, const CovariateSpace &space,
                const std::map<std::string, Eigen::MatrixXd> &custom)
      : text_(text), space_(space), custom_(custom) {}

  KernelExpr parse() {
    skip_space();
    if (at_end()) throw FormulaError("empty formula");
    std::string response = identifier("response name");
    expect('~');
    std::vector<KernelTerm> terms;
    terms.push_back(term());
    while (consume('+')) terms.push_back(term());
    skip_space();
    if (!at_end())
      throw FormulaError("unexpected text at position " +
                         std::to_string(pos_) + " in formula");
    return KernelExpr(space_, std::move(terms), std::move(response));
  }

 private:
  KernelTerm term() {
    KernelTerm t;
    factor(t);
    while (consume('*')) factor(t);
    // Canonical order: continuous factors first, each group by covariate.
    std::stable_sort(t.continuous.begin(), t.continuous.end(),
                     [](const auto &a, const auto &b) { return a.dim < b.dim; });
    std::stable_sort(t.categorical.begin(), t.categorical.end(),
                     [](const auto &a, const auto &b) {
                       return kernel_dim(a) < kernel_dim(b);
                     });
    return t;
  }

  void factor(KernelTerm &t) {
    std::string kind = identifier("kernel name");
    expect('(');
    std::string dim_name = identifier("covariate name");
    const std::size_t dim = space_.index_of(dim_name);
    auto require_categorical = [&] {
      if (!space_.is_categorical(dim))
        throw FormulaError(kind + "() needs a categorical covariate, '" +
                           dim_name + "' is continuous");
    };
    if (kind == "gp") {
      if (!space_.is_continuous(dim))
        throw FormulaError("gp() needs a continuous covariate, '" + dim_name +
                           "' is categorical");
      t.continuous.push_back(EqKernel{dim});
    } else if (kind == "zs") {
      require_categorical();
      t.categorical.emplace_back(
          ZeroSumKernel{dim, space_.num_categories(dim)});
    } else if (kind == "cs") {
      require_categorical();
      expect(':');
      const double variance = number();
      expect(',');
      const double covariance = number();
      try {
        t.categorical.emplace_back(make_compound_symmetry(
            dim, space_.num_categories(dim), variance, covariance));
      } catch (const InvalidArgument &e) {
        throw FormulaError(e.what());
      }
    } else if (kind == "bin") {
      require_categorical();
      std::vector<int> masked;
      if (consume(':')) {
        do {
          std::string label = label_token();
          auto level = space_.level_of(dim, label);
          if (!level)
            throw FormulaError("unknown level '" + label + "' of '" +
                               dim_name + "' in bin()");
          masked.push_back(*level);
        } while (consume(','));
      }
      t.categorical.emplace_back(
          make_mask(dim, space_.num_categories(dim), std::move(masked)));
    } else if (kind == "cat") {
      require_categorical();
      auto it = custom_.find(dim_name);
      if (it == custom_.end())
        throw FormulaError("cat(" + dim_name +
                           ") needs a custom kernel matrix");
      if (static_cast<std::size_t>(it->second.rows()) !=
          space_.num_categories(dim))
        throw FormulaError("custom kernel matrix for '" + dim_name +
                           "' has the wrong size");
      try {
        t.categorical.emplace_back(make_custom(dim, it->second));
      } catch (const InvalidArgument &e) {
        throw FormulaError(e.what());
      }
    } else {
      throw FormulaError("unknown kernel '" + kind + "'");
    }
    expect(')');
  }

  bool at_end() const { return pos_ >= text_.size(); }

  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool consume(char c) {
    skip_space();
    if (!at_end() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!consume(c))
      throw FormulaError(std::string("expected '") + c + "' at position " +
                         std::to_string(pos_) + " in formula");
  }

  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
           c == '.';
  }

  std::string identifier(const char *what) {
    skip_space();
    const std::size_t begin = pos_;
    while (!at_end() && ident_char(text_[pos_])) ++pos_;
    if (begin == pos_)
      throw FormulaError(std::string("expected ") + what + " at position " +
                         std::to_string(begin) + " in formula");
    return std::string(text_.substr(begin, pos_ - begin));
  }

  std::string label_token() {
    skip_space();
    const std::size_t begin = pos_;
    while (!at_end() && text_[pos_] != ',' && text_[pos_] != ')' &&
           !std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (begin == pos_) throw FormulaError("expected level label in bin()");
    return std::string(text_.substr(begin, pos_ - begin));
  }

  double number() {
    skip_space();
    double value = 0.0;
    const char *first = text_.data() + pos_;
    const char *last = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first)
      throw FormulaError("expected number at position " +
                         std::to_string(pos_) + " in formula");
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  std::string_view text_;
  const CovariateSpace &space_;
  const std::map<std::string, Eigen::MatrixXd> &custom_;
  std::size_t pos_ = 0;
};

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

KernelExpr parse_formula(
    std::string_view text, const CovariateSpace &space,
    const std::map<std::string, Eigen::MatrixXd> &custom_matrices) {
  return FormulaParser(text, space, custom_matrices).parse();
}

std::string format_formula(const KernelExpr &expr) {
  const auto &space = expr.space();
  std::ostringstream out;
  out << expr.response() << " ~ ";
  for (std::size_t j = 0; j < expr.num_terms(); ++j) {
    if (j > 0) out << " + ";
    const auto &t = expr.term(j);
    bool first = true;
    auto sep = [&] {
      if (!first) out << '*';
      first = false;
    };
    for (const auto &e : t.continuous) {
      sep();
      out << "gp(" << space.name(e.dim) << ')';
    }
    for (const auto &c : t.categorical) {
      sep();
      const auto &name = space.name(kernel_dim(c));
      if (std::holds_alternative<ZeroSumKernel>(c)) {
        out << "zs(" << name << ')';
      } else if (const auto *cs = std::get_if<CompoundSymmetryKernel>(&c)) {
        out << "cs(" << name << ": " << format_number(cs->variance) << ", "
            << format_number(cs->covariance) << ')';
      } else if (const auto *m = std::get_if<MaskKernel>(&c)) {
        out << "bin(" << name;
        const auto &labels =
            std::get<CategoricalDim>(space.dim(m->dim)).labels;
        for (std::size_t k = 0; k < m->masked.size(); ++k)
          out << (k == 0 ? ": " : ", ") << labels.at(m->masked[k]);
        out << ')';
      } else {
        out << "cat(" << name << ')';
      }
    }
  }
  return out.str();
}

}  // namespace mdgp
