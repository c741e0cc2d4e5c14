#include "sct/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "sct/error.hpp"

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace sct {

namespace {

constexpr char kImageMagic[8] = {'S', 'C', 'T', 'I', 'M', 'A', 'G', 'E'};
constexpr char kSinoMagic[8] = {'S', 'C', 'T', 'S', 'I', 'N', 'O', 'G'};

class Writer {
public:
    template <typename T>
    void put(const T& v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        buf_.append(p, sizeof(T));
    }
    void put_bytes(const char* p, std::size_t n) { buf_.append(p, n); }
    void put_doubles(const std::vector<double>& v) {
        buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    }
    const std::string& str() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(std::string data, std::filesystem::path path) : data_(std::move(data)), path_(std::move(path)) {}

    template <typename T>
    T get() {
        T v;
        need(sizeof(T));
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::vector<double> get_doubles(std::size_t n) {
        if (n > (data_.size() - pos_) / sizeof(double)) truncated();
        std::vector<double> v(n);
        std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
        return v;
    }
    void expect_end() const {
        if (pos_ != data_.size()) {
            throw IoError(fmt::format("{}: {} trailing bytes after payload", path_.string(), data_.size() - pos_));
        }
    }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) truncated();
    }
    [[noreturn]] void truncated() const {
        throw IoError(path_.string() + ": truncated file (payload shorter than header declares)");
    }

    std::string data_;
    std::filesystem::path path_;
    std::size_t pos_ = 0;
};

void check_header(Reader& r, const char (&magic)[8], const std::filesystem::path& path, const char* kind) {
    const auto m = r.get_bytes(8);
    if (std::memcmp(m.data(), magic, 8) != 0) throw IoError(path.string() + ": not a " + kind + " file (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != kFormatVersion) {
        throw IoError(fmt::format("{}: unsupported {} format version {} (expected {})", path.string(), kind, version,
                                  kFormatVersion));
    }
    const auto dtype = r.get<std::uint32_t>();
    if (dtype != kDtypeF64LE) throw IoError(fmt::format("{}: unsupported dtype tag {}", path.string(), dtype));
}

} // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_image(const std::filesystem::path& path, const MaterialImage& img, std::uint64_t iteration) {
    if (img.data.size() != img.n_voxels() * img.stride() || img.names.size() != img.stride()) {
        throw ShapeError("image: payload does not match dimensions");
    }
    Writer w;
    w.put_bytes(kImageMagic, 8);
    w.put(kFormatVersion);
    w.put(kDtypeF64LE);
    w.put(static_cast<std::uint32_t>(img.image_n));
    w.put(static_cast<std::uint32_t>(img.n_components));
    w.put(img.voxel_mm);
    w.put(iteration);
    for (const auto& name : img.names) {
        w.put(static_cast<std::uint32_t>(name.size()));
        w.put_bytes(name.data(), name.size());
    }
    w.put_doubles(img.data);
    write_file_atomic(path, w.str());
}

MaterialImage read_image(const std::filesystem::path& path, std::uint64_t* iteration) {
    Reader r(read_file(path), path);
    check_header(r, kImageMagic, path, "image");
    MaterialImage img;
    img.image_n = static_cast<int>(r.get<std::uint32_t>());
    img.n_components = static_cast<int>(r.get<std::uint32_t>());
    img.voxel_mm = r.get<double>();
    const auto iter = r.get<std::uint64_t>();
    if (iteration) *iteration = iter;
    if (img.image_n < 1 || img.n_components < 1) throw IoError(path.string() + ": invalid image dimensions");
    for (int m = 0; m < img.n_components; ++m) {
        const auto len = r.get<std::uint32_t>();
        img.names.push_back(r.get_bytes(len));
    }
    img.data = r.get_doubles(img.n_voxels() * img.stride());
    r.expect_end();
    return img;
}

void write_sinogram(const std::filesystem::path& path, const SpectralSinogram& sino) {
    sino.validate();
    Writer w;
    w.put_bytes(kSinoMagic, 8);
    w.put(kFormatVersion);
    w.put(kDtypeF64LE);
    w.put(static_cast<std::uint32_t>(sino.n_bins));
    w.put(static_cast<std::uint32_t>(sino.n_views));
    w.put(static_cast<std::uint32_t>(sino.n_channels));
    w.put(std::uint32_t{0});
    w.put_doubles(sino.i0);
    w.put_doubles(sino.line_integrals);
    w.put_doubles(sino.counts);
    w.put_doubles(sino.weight_scale);
    write_file_atomic(path, w.str());
}

SpectralSinogram read_sinogram(const std::filesystem::path& path) {
    Reader r(read_file(path), path);
    check_header(r, kSinoMagic, path, "sinogram");
    SpectralSinogram s;
    s.n_bins = static_cast<int>(r.get<std::uint32_t>());
    s.n_views = static_cast<int>(r.get<std::uint32_t>());
    s.n_channels = static_cast<int>(r.get<std::uint32_t>());
    (void)r.get<std::uint32_t>();
    if (s.n_bins < 1 || s.n_views < 1 || s.n_channels < 1) throw IoError(path.string() + ": invalid sinogram dimensions");
    s.i0 = r.get_doubles(static_cast<std::size_t>(s.n_bins));
    s.line_integrals = r.get_doubles(s.cells());
    s.counts = r.get_doubles(s.cells());
    s.weight_scale = r.get_doubles(s.cells());
    r.expect_end();
    return s;
}

void write_mixing_matrix(const std::filesystem::path& path, const MixingMatrix& mix) {
    mix.validate();
    std::string out = fmt::format("{} {}\n", mix.n_bins(), mix.n_materials());
    for (Eigen::Index e = 0; e < mix.n_bins(); ++e) {
        for (Eigen::Index m = 0; m < mix.n_materials(); ++m) {
            out += fmt::format("{}{:.17g}", m ? " " : "", mix.lac(e, m));
        }
        out += '\n';
    }
    for (std::size_t i = 0; i < mix.bin_edges_kev.size(); ++i) {
        out += fmt::format("{}{:.17g}", i ? " " : "", mix.bin_edges_kev[i]);
    }
    out += '\n';
    for (std::size_t i = 0; i < mix.materials.size(); ++i) {
        if (mix.materials[i].find_first_of(" \t\n") != std::string::npos) {
            throw IoError("material name '" + mix.materials[i] + "' contains whitespace");
        }
        out += (i ? " " : "") + mix.materials[i];
    }
    out += '\n';
    write_file_atomic(path, out);
}

MixingMatrix read_mixing_matrix(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    auto fail = [&](const std::string& what) -> void { throw IoError(path.string() + ": " + what); };
    long e = 0;
    long m = 0;
    if (!(in >> e >> m) || e < 1 || m < 1) fail("bad header (expected 'E M')");
    auto number = [&]() {
        std::string tok;
        if (!(in >> tok)) fail("unexpected end of file");
        double v = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) fail("bad number '" + tok + "'");
        return v;
    };
    MixingMatrix mix;
    mix.lac.resize(e, m);
    for (long i = 0; i < e; ++i) {
        for (long j = 0; j < m; ++j) mix.lac(i, j) = number();
    }
    for (long i = 0; i <= e; ++i) mix.bin_edges_kev.push_back(number());
    for (long j = 0; j < m; ++j) {
        std::string name;
        if (!(in >> name)) fail("missing material names");
        mix.materials.push_back(name);
    }
    std::string extra;
    if (in >> extra) fail("trailing content '" + extra + "'");
    mix.validate();
    return mix;
}

} // namespace sct
