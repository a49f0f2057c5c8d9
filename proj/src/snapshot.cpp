#include "compcg/snapshot.hpp"

#include "compcg/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace compcg {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'O', 'M', 'P', 'C', 'G', 'M', '\0'};

enum class CovTag : std::uint32_t { TensorProduct = 0, Nonseparable = 1 };
enum class MeanTag : std::uint32_t { Zero = 0, Constant = 1, Callback = 2 };

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    template <typename T>
    void put(T v) {
        v = to_little(v);
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
        if (!out_) throw IoError("snapshot: write failed");
    }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f64(double v) { put(v); }

    void vec(const Vector& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        for (Index i = 0; i < v.size(); ++i) f64(v(i));
    }
    void mat(const Matrix& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    template <typename T>
    T get() {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) throw IoError("snapshot: truncated input");
        return to_little(v);
    }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    double f64() { return get<double>(); }

    Index count() {
        const std::uint64_t n = u64();
        if (n > (1ull << 32)) throw IoError("snapshot: implausible dimension");
        return static_cast<Index>(n);
    }
    Vector vec() {
        Vector v(count());
        for (Index i = 0; i < v.size(); ++i) v(i) = f64();
        return v;
    }
    Matrix mat() {
        const Index r = count();
        const Index c = count();
        Matrix m(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j) m(i, j) = f64();
        return m;
    }

private:
    std::istream& in_;
};

}  // namespace

void save_snapshot(const CompanionModel& model, std::ostream& out) {
    Writer w(out);
    out.write(kMagic.data(), kMagic.size());
    w.u32(kSnapshotVersion);
    w.u32(0);
    w.u64(static_cast<std::uint64_t>(model.dim()));

    const ScalarKernel& k = model.prior_cov().kernel();
    w.u32(static_cast<std::uint32_t>(k.family));
    w.f64(k.lengthscale);
    w.f64(k.amplitude);
    if (const auto* tp = std::get_if<TensorProductPrior>(&model.prior_cov().variant())) {
        w.u32(static_cast<std::uint32_t>(CovTag::TensorProduct));
        w.mat(tp->sigma);
    } else {
        w.u32(static_cast<std::uint32_t>(CovTag::Nonseparable));
    }

    const PriorMean& mean = model.prior_mean();
    if (std::holds_alternative<ZeroMean>(mean)) {
        w.u32(static_cast<std::uint32_t>(MeanTag::Zero));
    } else if (const auto* c = std::get_if<ConstantMean>(&mean)) {
        w.u32(static_cast<std::uint32_t>(MeanTag::Constant));
        w.vec(c->value);
    } else {
        throw InputError("snapshot: callback prior means cannot be serialized");
    }

    w.f64(model.jitter_scale());
    const UpdatePolicy& p = model.policy();
    w.u32(static_cast<std::uint32_t>(p.mode));
    w.u64(static_cast<std::uint64_t>(p.iteration_threshold));
    w.f64(p.reset_jump_factor);
    w.u64(static_cast<std::uint64_t>(p.max_records));
    w.u64(static_cast<std::uint64_t>(p.every_j));
    w.u64(static_cast<std::uint64_t>(p.trailing_window));
    w.u64(static_cast<std::uint64_t>(p.min_history));

    w.u64(static_cast<std::uint64_t>(model.size()));
    for (const auto& r : model.records()) {
        w.vec(r->theta.coords());
        w.f64(r->jitter);
        w.mat(r->W);
        w.vec(r->z);
    }
    w.mat(model.chol_g());
    out.flush();
    if (!out) throw IoError("snapshot: write failed");
}

CompanionModel load_snapshot(std::istream& in, std::optional<SystemMatrixProvider> provider,
                             std::optional<PriorMean> callback_mean) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw IoError("snapshot: bad magic");
    Reader r(in);
    const std::uint32_t version = r.u32();
    if (version != kSnapshotVersion) {
        throw IoError("snapshot: unsupported version " + std::to_string(version));
    }
    r.u32();
    const Index d = r.count();

    ScalarKernel k;
    const std::uint32_t family = r.u32();
    if (family != static_cast<std::uint32_t>(KernelFamily::Matern32)) throw IoError("snapshot: unknown kernel family");
    k.family = KernelFamily::Matern32;
    k.lengthscale = r.f64();
    k.amplitude = r.f64();

    std::optional<PriorCovariance> cov;
    switch (static_cast<CovTag>(r.u32())) {
        case CovTag::TensorProduct:
            cov = PriorCovariance::tensor_product(k, r.mat());
            break;
        case CovTag::Nonseparable:
            if (!provider) throw InputError("snapshot: nonseparable prior needs a system-matrix provider");
            cov = PriorCovariance::nonseparable(k, *provider);
            break;
        default:
            throw IoError("snapshot: unknown covariance tag");
    }

    PriorMean mean = ZeroMean{};
    switch (static_cast<MeanTag>(r.u32())) {
        case MeanTag::Zero:
            break;
        case MeanTag::Constant:
            mean = ConstantMean{r.vec()};
            break;
        default:
            throw IoError("snapshot: unknown mean tag");
    }
    if (callback_mean) mean = *callback_mean;

    const double jitter_scale = r.f64();
    UpdatePolicy p;
    const std::uint32_t mode = r.u32();
    if (mode > static_cast<std::uint32_t>(UpdateMode::Never)) throw IoError("snapshot: unknown update mode");
    p.mode = static_cast<UpdateMode>(mode);
    p.iteration_threshold = static_cast<int>(r.u64());
    p.reset_jump_factor = r.f64();
    p.max_records = static_cast<std::size_t>(r.u64());
    p.every_j = static_cast<int>(r.u64());
    p.trailing_window = static_cast<std::size_t>(r.u64());
    p.min_history = static_cast<std::size_t>(r.u64());

    const Index n = r.count();
    std::vector<std::shared_ptr<const TrainingRecord>> records;
    records.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        auto rec = std::make_shared<TrainingRecord>();
        rec->theta = ParameterPoint(r.vec());
        rec->jitter = r.f64();
        rec->W = r.mat();
        rec->z = r.vec();
        records.push_back(std::move(rec));
    }
    Matrix chol = r.mat();
    return CompanionModel::from_parts(std::move(mean), std::move(*cov), d, p, jitter_scale, std::move(records),
                                      std::move(chol));
}

}  // namespace compcg
