#include "tomo/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace tomo {

namespace {

constexpr std::array<char, 4> kMagic = {'T', 'O', 'M', 'O'};

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u64(std::string& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint64_t get_u64(const unsigned char* p) {
    return static_cast<std::uint64_t>(get_u32(p)) |
           (static_cast<std::uint64_t>(get_u32(p + 4)) << 32);
}

template <typename T>
void save_tensor_impl(const Tensor2<T>& t, const std::string& path, Dtype dtype) {
    if (!t.all_finite()) throw ValidationError("save_tensor: non-finite data");
    std::string buf;
    buf.reserve(20 + t.size() * sizeof(T));
    buf.append(kMagic.data(), kMagic.size());
    put_u32(buf, kTomoVersion);
    put_u32(buf, static_cast<std::uint32_t>(dtype));
    put_u32(buf, static_cast<std::uint32_t>(t.rows()));
    put_u32(buf, static_cast<std::uint32_t>(t.cols()));
    for (std::size_t i = 0; i < t.size(); ++i) {
        if constexpr (sizeof(T) == 4)
            put_u32(buf, std::bit_cast<std::uint32_t>(t.data()[i]));
        else
            put_u64(buf, std::bit_cast<std::uint64_t>(t.data()[i]));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_tensor: cannot open " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("save_tensor: write failed for " + path);
}

template <typename T>
Tensor2<T> read_payload(std::ifstream& in, int rows, int cols, const std::string& path) {
    const std::size_t n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    std::vector<unsigned char> raw(n * sizeof(T));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw IoError("load_tensor: truncated payload in " + path);
    std::vector<T> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        if constexpr (sizeof(T) == 4)
            data[i] = std::bit_cast<T>(get_u32(raw.data() + i * 4));
        else
            data[i] = std::bit_cast<T>(get_u64(raw.data() + i * 8));
    }
    auto t = Tensor2<T>::from_data(rows, cols, std::move(data));
    if (!t.all_finite()) throw ValidationError("load_tensor: non-finite data in " + path);
    return t;
}

}  // namespace

void save_tensor(const Tensor2f& t, const std::string& path) {
    save_tensor_impl(t, path, Dtype::f32);
}

void save_tensor(const Tensor2d& t, const std::string& path) {
    save_tensor_impl(t, path, Dtype::f64);
}

std::variant<Tensor2f, Tensor2d> load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_tensor: cannot open " + path);
    std::array<unsigned char, 20> header{};
    in.read(reinterpret_cast<char*>(header.data()), header.size());
    if (static_cast<std::size_t>(in.gcount()) != header.size())
        throw IoError("load_tensor: truncated header in " + path);
    if (std::memcmp(header.data(), kMagic.data(), 4) != 0)
        throw IoError("load_tensor: bad magic in " + path);
    const std::uint32_t version = get_u32(header.data() + 4);
    if (version != kTomoVersion)
        throw IoError("load_tensor: unsupported version in " + path);
    const std::uint32_t dtype = get_u32(header.data() + 8);
    const std::uint32_t rows = get_u32(header.data() + 12);
    const std::uint32_t cols = get_u32(header.data() + 16);
    if (rows > (1u << 20) || cols > (1u << 20))
        throw ValidationError("load_tensor: implausible dimensions in " + path);
    if (dtype == static_cast<std::uint32_t>(Dtype::f32))
        return read_payload<float>(in, static_cast<int>(rows), static_cast<int>(cols), path);
    if (dtype == static_cast<std::uint32_t>(Dtype::f64))
        return read_payload<double>(in, static_cast<int>(rows), static_cast<int>(cols), path);
    throw IoError("load_tensor: unknown dtype in " + path);
}

template <typename T>
Tensor2<T> load_tensor_as(const std::string& path) {
    auto loaded = load_tensor(path);
    if (std::holds_alternative<Tensor2<T>>(loaded)) return std::get<Tensor2<T>>(loaded);
    if constexpr (std::is_same_v<T, float>)
        return std::get<Tensor2d>(loaded).template cast<float>();
    else
        return std::get<Tensor2f>(loaded).template cast<double>();
}

template Tensor2<float> load_tensor_as<float>(const std::string&);
template Tensor2<double> load_tensor_as<double>(const std::string&);

std::uint8_t window_to_u8(double value, const WindowSpec& w) {
    const double lo = w.center - w.width / 2.0;
    double x = (value - lo) / w.width;
    if (x < 0.0) x = 0.0;
    if (x > 1.0) x = 1.0;
    return static_cast<std::uint8_t>(std::floor(x * 255.0 + 0.5));
}

namespace {

// Minimal grayscale PNG writer: stored (uncompressed) deflate blocks inside a
// zlib stream, so output bytes depend on nothing but the pixel data.

std::uint32_t crc32_update(std::uint32_t crc, const unsigned char* data, std::size_t len) {
    static std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc;
}

std::uint32_t adler32(const std::string& data) {
    std::uint32_t a = 1, b = 0;
    for (unsigned char ch : data) {
        a = (a + ch) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void put_u32_be(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

void append_chunk(std::string& out, const char type[4], const std::string& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    out.append(type, 4);
    out.append(data);
    std::uint32_t crc = crc32_update(0xffffffffu,
                                     reinterpret_cast<const unsigned char*>(type), 4);
    crc = crc32_update(crc, reinterpret_cast<const unsigned char*>(data.data()), data.size());
    put_u32_be(out, crc ^ 0xffffffffu);
}

std::string deflate_stored(const std::string& raw) {
    std::string z;
    z.push_back(0x78);  // zlib header, 32K window
    z.push_back(0x01);
    std::size_t pos = 0;
    do {
        const std::size_t len = std::min<std::size_t>(raw.size() - pos, 65535);
        const bool final = pos + len == raw.size();
        z.push_back(final ? 1 : 0);  // BFINAL, BTYPE=00
        z.push_back(static_cast<char>(len & 0xff));
        z.push_back(static_cast<char>((len >> 8) & 0xff));
        z.push_back(static_cast<char>(~len & 0xff));
        z.push_back(static_cast<char>((~len >> 8) & 0xff));
        z.append(raw, pos, len);
        pos += len;
    } while (pos < raw.size());
    put_u32_be(z, adler32(raw));
    return z;
}

template <typename T>
void export_png_impl(const Tensor2<T>& t, const WindowSpec& w, const std::string& path) {
    const int rows = t.rows(), cols = t.cols();
    std::string raw;
    raw.reserve(static_cast<std::size_t>(rows) * (cols + 1));
    for (int r = 0; r < rows; ++r) {
        raw.push_back(0);  // per-scanline filter: none
        for (int c = 0; c < cols; ++c)
            raw.push_back(static_cast<char>(window_to_u8(static_cast<double>(t(r, c)), w)));
    }

    std::string png("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(cols));
    put_u32_be(ihdr, static_cast<std::uint32_t>(rows));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // no interlace
    append_chunk(png, "IHDR", ihdr);
    append_chunk(png, "IDAT", deflate_stored(raw));
    append_chunk(png, "IEND", "");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("export_png: cannot open " + path);
    out.write(png.data(), static_cast<std::streamsize>(png.size()));
    if (!out) throw IoError("export_png: write failed for " + path);
}

}  // namespace

void export_png(const Tensor2f& t, const WindowSpec& w, const std::string& path) {
    export_png_impl(t, w, path);
}

void export_png(const Tensor2d& t, const WindowSpec& w, const std::string& path) {
    export_png_impl(t, w, path);
}

}  // namespace tomo
