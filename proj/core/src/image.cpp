#include "cnet/image.hpp"

#include <cmath>
#include <fstream>

#include "cnet/error.hpp"
#include "cnet/ops.hpp"

namespace cnet {

namespace {

// Reads the next header integer, skipping whitespace and '#' comments.
std::int64_t header_int(std::istream& is, const std::string& origin) {
    int ch = is.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') {
                ch = is.get();
            }
        } else if (std::isspace(ch) != 0) {
            ch = is.get();
        } else {
            break;
        }
    }
    if (ch == EOF || std::isdigit(ch) == 0) {
        throw DataError(origin + ": malformed PPM header");
    }
    std::int64_t v = 0;
    while (ch != EOF && std::isdigit(ch) != 0) {
        v = v * 10 + (ch - '0');
        if (v > (1 << 24)) {
            throw DataError(origin + ": implausible PPM header value");
        }
        ch = is.get();
    }
    if (ch != EOF) {
        is.unget();
    }
    return v;
}

}  // namespace

Image make_image(std::int64_t width, std::int64_t height) {
    if (width < 1 || height < 1) {
        throw DataError("image: non-positive size " + std::to_string(width) + "x" +
                        std::to_string(height));
    }
    Image img;
    img.width = width;
    img.height = height;
    img.pixels.assign(static_cast<std::size_t>(3 * width * height), 0.0f);
    return img;
}

Image load_ppm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open image " + path.string());
    }
    const std::string origin = path.string();
    char magic[2] = {};
    is.read(magic, 2);
    if (is.gcount() != 2 || magic[0] != 'P' || magic[1] != '6') {
        throw DataError(origin + ": not a binary P6 PPM");
    }
    const std::int64_t width = header_int(is, origin);
    const std::int64_t height = header_int(is, origin);
    const std::int64_t maxval = header_int(is, origin);
    if (maxval != 255) {
        throw DataError(origin + ": only 8-bit images are supported, maxval is " +
                        std::to_string(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    const int sep = is.get();
    if (sep == EOF || std::isspace(sep) == 0) {
        throw DataError(origin + ": malformed PPM header");
    }

    Image img = make_image(width, height);
    const std::size_t count = static_cast<std::size_t>(3 * width * height);
    std::vector<unsigned char> raw(count);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(is.gcount()) != count) {
        throw DataError(origin + ": truncated pixel data");
    }
    for (std::int64_t y = 0; y < height; ++y) {
        for (std::int64_t x = 0; x < width; ++x) {
            for (std::int64_t c = 0; c < 3; ++c) {
                img.at(c, y, x) =
                    static_cast<float>(raw[static_cast<std::size_t>((y * width + x) * 3 + c)]) /
                    255.0f;
            }
        }
    }
    return img;
}

void save_ppm(const std::filesystem::path& path, const Image& image) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(3 * image.width * image.height));
    for (std::int64_t y = 0; y < image.height; ++y) {
        for (std::int64_t x = 0; x < image.width; ++x) {
            for (std::int64_t c = 0; c < 3; ++c) {
                float v = image.at(c, y, x);
                v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                raw[static_cast<std::size_t>((y * image.width + x) * 3 + c)] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
        }
    }
    os.write(reinterpret_cast<const char*>(raw.data()),
             static_cast<std::streamsize>(raw.size()));
    if (!os.flush()) {
        throw IoError("failed writing image " + path.string());
    }
}

Image resize_bilinear(const Image& image, std::int64_t width, std::int64_t height) {
    if (image.width < 1 || image.height < 1) {
        throw DataError("resize: empty source image");
    }
    if (width == image.width && height == image.height) {
        return image;
    }
    Image out = make_image(width, height);
    const auto ay = detail::lerp_axis<float>(image.height, height);
    const auto ax = detail::lerp_axis<float>(image.width, width);
    for (std::int64_t c = 0; c < 3; ++c) {
        for (std::int64_t i = 0; i < height; ++i) {
            const std::int64_t y0 = ay.lo[static_cast<std::size_t>(i)];
            const std::int64_t y1 = ay.hi[static_cast<std::size_t>(i)];
            const float fy = ay.frac[static_cast<std::size_t>(i)];
            for (std::int64_t j = 0; j < width; ++j) {
                const std::int64_t x0 = ax.lo[static_cast<std::size_t>(j)];
                const std::int64_t x1 = ax.hi[static_cast<std::size_t>(j)];
                const float fx = ax.frac[static_cast<std::size_t>(j)];
                const float v00 = image.at(c, y0, x0);
                const float v01 = image.at(c, y0, x1);
                const float v10 = image.at(c, y1, x0);
                const float v11 = image.at(c, y1, x1);
                out.at(c, i, j) = (1.0f - fy) * ((1.0f - fx) * v00 + fx * v01) +
                                  fy * ((1.0f - fx) * v10 + fx * v11);
            }
        }
    }
    return out;
}

}  // namespace cnet
