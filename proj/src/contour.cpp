#include "priorseg/contour.hpp"

#include "priorseg/config.hpp"
#include "priorseg/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace priorseg {

namespace {

// Edge ids: 2*(y*w + x) for the horizontal edge (x,y)-(x+1,y),
// 2*(y*w + x) + 1 for the vertical edge (x,y)-(x,y+1).
struct EdgeGrid
{
    const ScalarField& phi;
    int w;

    long horizontal(int x, int y) const { return 2L * (long(y) * w + x); }
    long vertical(int x, int y) const { return 2L * (long(y) * w + x) + 1; }

    Eigen::Vector2d point(long id) const
    {
        const long cell = id / 2;
        const int x = static_cast<int>(cell % w);
        const int y = static_cast<int>(cell / w);
        const bool vert = (id % 2) == 1;
        const int x1 = vert ? x : x + 1;
        const int y1 = vert ? y + 1 : y;
        const double a = phi(x, y);
        const double b = phi(x1, y1);
        const double t = a / (a - b);
        return {x + t * (x1 - x), y + t * (y1 - y)};
    }
};

} // namespace

std::vector<Contour> extract_contours(const ScalarField& phi)
{
    const int w = phi.width();
    const int h = phi.height();
    std::vector<Contour> out;
    if (w < 2 || h < 2) {
        return out;
    }
    const EdgeGrid grid{phi, w};

    std::vector<std::array<long, 2>> segments;
    for (int y = 0; y + 1 < h; ++y) {
        for (int x = 0; x + 1 < w; ++x) {
            const double v[4] = {phi(x, y), phi(x + 1, y), phi(x + 1, y + 1), phi(x, y + 1)};
            const bool pos[4] = {v[0] > 0, v[1] > 0, v[2] > 0, v[3] > 0};
            const long top = grid.horizontal(x, y);
            const long right = grid.vertical(x + 1, y);
            const long bottom = grid.horizontal(x, y + 1);
            const long left = grid.vertical(x, y);
            std::array<long, 4> crossed{};
            int n = 0;
            if (pos[0] != pos[1]) crossed[n++] = top;
            if (pos[1] != pos[2]) crossed[n++] = right;
            if (pos[2] != pos[3]) crossed[n++] = bottom;
            if (pos[3] != pos[0]) crossed[n++] = left;
            if (n == 2) {
                segments.push_back({crossed[0], crossed[1]});
            } else if (n == 4) {
                const bool center_pos = (v[0] + v[1] + v[2] + v[3]) > 0;
                if (center_pos == pos[0]) {
                    // Corners 0 and 2 connect through the center.
                    segments.push_back({top, right});
                    segments.push_back({bottom, left});
                } else {
                    segments.push_back({left, top});
                    segments.push_back({right, bottom});
                }
            }
        }
    }

    std::unordered_map<long, std::vector<int>> at_edge;
    for (int i = 0; i < static_cast<int>(segments.size()); ++i) {
        at_edge[segments[i][0]].push_back(i);
        at_edge[segments[i][1]].push_back(i);
    }
    std::vector<bool> used(segments.size(), false);

    // Follows unused segments from `tip`, appending edge ids to chain.
    auto extend = [&](std::vector<long>& chain, long tip) {
        while (true) {
            int next = -1;
            for (int s : at_edge[tip]) {
                if (!used[s]) {
                    next = s;
                    break;
                }
            }
            if (next < 0) {
                return;
            }
            used[next] = true;
            tip = segments[next][0] == tip ? segments[next][1] : segments[next][0];
            chain.push_back(tip);
        }
    };

    for (int i = 0; i < static_cast<int>(segments.size()); ++i) {
        if (used[i]) {
            continue;
        }
        used[i] = true;
        std::vector<long> forward{segments[i][0], segments[i][1]};
        extend(forward, segments[i][1]);
        Contour c;
        if (forward.back() == forward.front()) {
            c.closed = true;
        } else {
            std::vector<long> backward;
            extend(backward, segments[i][0]);
            std::reverse(backward.begin(), backward.end());
            backward.insert(backward.end(), forward.begin(), forward.end());
            forward = std::move(backward);
        }
        c.points.reserve(forward.size());
        for (long id : forward) {
            c.points.push_back(grid.point(id));
        }
        out.push_back(std::move(c));
    }
    return out;
}

double polyline_length(const Contour& c)
{
    double len = 0;
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        len += (c.points[i] - c.points[i - 1]).norm();
    }
    return len;
}

namespace {

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b)
{
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + t * ab - p).norm();
}

} // namespace

double distance_to_contours(const Eigen::Vector2d& p, const std::vector<Contour>& contours)
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : contours) {
        if (c.points.size() == 1) {
            best = std::min(best, (c.points[0] - p).norm());
        }
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            best = std::min(best, segment_distance(p, c.points[i - 1], c.points[i]));
        }
    }
    return best;
}

void write_contours_csv(const std::vector<Contour>& contours, std::ostream& out)
{
    out << "contour_id,x,y\n";
    for (std::size_t id = 0; id < contours.size(); ++id) {
        for (const auto& p : contours[id].points) {
            out << id << ',' << format_double(p.x()) << ',' << format_double(p.y()) << '\n';
        }
    }
}

std::vector<Contour> read_contours_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != "contour_id,x,y") {
        throw FormatError("contours csv: missing header");
    }
    std::vector<Contour> out;
    long last_id = -1;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string a, b, c;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
            throw FormatError("contours csv: malformed row '" + line + "'");
        }
        long id = 0;
        double x = 0, y = 0;
        try {
            id = std::stol(a);
            x = std::stod(b);
            y = std::stod(c);
        } catch (const std::exception&) {
            throw FormatError("contours csv: malformed row '" + line + "'");
        }
        if (id != last_id) {
            if (id != last_id + 1) {
                throw FormatError("contours csv: contour ids must be consecutive");
            }
            out.emplace_back();
            last_id = id;
        }
        out.back().points.emplace_back(x, y);
    }
    for (auto& c : out) {
        c.closed = c.points.size() > 2 && c.points.front() == c.points.back();
    }
    return out;
}

BinaryMask rasterize_contours(const std::vector<Contour>& contours, int width, int height)
{
    BinaryMask m(width, height);
    auto mark = [&](const Eigen::Vector2d& p) {
        const int x = static_cast<int>(std::lround(p.x()));
        const int y = static_cast<int>(std::lround(p.y()));
        if (x >= 0 && y >= 0 && x < width && y < height) {
            m.set(x, y, true);
        }
    };
    for (const auto& c : contours) {
        if (c.points.size() == 1) {
            mark(c.points[0]);
        }
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            const Eigen::Vector2d a = c.points[i - 1];
            const Eigen::Vector2d b = c.points[i];
            const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / 0.25)));
            for (int k = 0; k <= n; ++k) {
                mark(a + (b - a) * (double(k) / n));
            }
        }
    }
    return m;
}

ScalarField overlay_contours(const ScalarField& image, const std::vector<Contour>& contours)
{
    const auto mask = rasterize_contours(contours, image.width(), image.height());
    ScalarField out = image;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (mask(x, y)) {
                out(x, y) = 255.0;
            }
        }
    }
    return out;
}

} // namespace priorseg
