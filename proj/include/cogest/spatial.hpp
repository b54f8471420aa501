#pragma once

#include "cogest/core.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace cogest
{
    // Planar projective map from one camera frame to another. Stored scale-normalized
    // with m(2,2) == 1.
    template <class From, class To>
    class ProjectiveMap
    {
    public:
        using Matrix = Eigen::Matrix3d;

        ProjectiveMap() : m_(Matrix::Identity()) {}

        static ProjectiveMap from_matrix(const Matrix& m)
        {
            if (!m.allFinite())
                throw Error(ErrorCode::DegenerateConfiguration, "homography has non-finite entries");
            if (std::abs(m(2, 2)) <= 1e-12 * m.cwiseAbs().maxCoeff())
                throw Error(ErrorCode::DegenerateConfiguration, "homography cannot be normalized (h22 == 0)");
            Matrix n = m / m(2, 2);
            if (std::abs(n.determinant()) < 1e-12)
                throw Error(ErrorCode::DegenerateConfiguration, "homography is singular");
            ProjectiveMap out;
            out.m_ = n;
            return out;
        }

        static ProjectiveMap from_rows(const std::array<double, 9>& rows)
        {
            Matrix m;
            m << rows[0], rows[1], rows[2], rows[3], rows[4], rows[5], rows[6], rows[7], rows[8];
            return from_matrix(m);
        }

        static ProjectiveMap translation(double tx, double ty)
        {
            Matrix m = Matrix::Identity();
            m(0, 2) = tx;
            m(1, 2) = ty;
            return from_matrix(m);
        }

        const Matrix& matrix() const noexcept { return m_; }

        std::array<double, 9> rows() const
        {
            return {m_(0, 0), m_(0, 1), m_(0, 2), m_(1, 0), m_(1, 1), m_(1, 2), m_(2, 0), m_(2, 1), m_(2, 2)};
        }

        ProjectiveMap<To, From> inverse() const { return ProjectiveMap<To, From>::from_matrix(m_.inverse()); }

        Point<To> apply(const Point<From>& p, double eps = 1e-12) const
        {
            const double w = m_(2, 0) * p.x + m_(2, 1) * p.y + m_(2, 2);
            if (!std::isfinite(w) || std::abs(w) < eps)
                throw Error(ErrorCode::PointAtInfinity, "point maps to the line at infinity");
            const double x = m_(0, 0) * p.x + m_(0, 1) * p.y + m_(0, 2);
            const double y = m_(1, 0) * p.x + m_(1, 1) * p.y + m_(1, 2);
            return {x / w, y / w};
        }

    private:
        Matrix m_;
    };

    using Homography = ProjectiveMap<FrontCamera, TopDownCamera>;

    inline TablePoint map_to_table(const ImagePoint& p, const Homography& h) { return h.apply(p); }

    struct Correspondence
    {
        ImagePoint front;
        TablePoint table;
    };

    struct Calibration
    {
        Homography homography;
        double rms_error = 0.0; // reprojection RMS in top-down pixels
        std::vector<Correspondence> correspondences;
    };

    namespace detail
    {
        // Hartley normalization: centroid to origin, mean distance sqrt(2).
        template <class Get>
        Eigen::Matrix3d normalizing_transform(std::span<const Correspondence> pts, Get get)
        {
            double cx = 0.0, cy = 0.0;
            for (const auto& c : pts)
            {
                cx += get(c).x;
                cy += get(c).y;
            }
            cx /= static_cast<double>(pts.size());
            cy /= static_cast<double>(pts.size());
            double mean = 0.0;
            for (const auto& c : pts)
                mean += std::hypot(get(c).x - cx, get(c).y - cy);
            mean /= static_cast<double>(pts.size());
            if (mean <= 0.0)
                throw Error(ErrorCode::DegenerateConfiguration, "all points coincide");
            const double s = std::sqrt(2.0) / mean;
            Eigen::Matrix3d t;
            t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
            return t;
        }

        inline bool collinear(const ImagePoint& a, const ImagePoint& b, const ImagePoint& c, double tol)
        {
            const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
            const double scale = std::max({std::hypot(b.x - a.x, b.y - a.y), std::hypot(c.x - a.x, c.y - a.y), 1.0});
            return std::abs(cross) <= tol * scale * scale;
        }
    } // namespace detail

    // Least-squares homography by the normalized direct linear transform.
    inline Calibration calibrate(std::span<const Correspondence> pairs)
    {
        if (pairs.size() < 4)
            throw Error(ErrorCode::InsufficientPoints, "need at least 4 correspondences, got " + std::to_string(pairs.size()));

        for (std::size_t i = 0; i < pairs.size(); ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (pairs[i].front == pairs[j].front)
                    throw Error(ErrorCode::DegenerateConfiguration, "coincident source points");
        if (pairs.size() == 4)
        {
            for (std::size_t a = 0; a < 4; ++a)
                for (std::size_t b = a + 1; b < 4; ++b)
                    for (std::size_t c = b + 1; c < 4; ++c)
                        if (detail::collinear(pairs[a].front, pairs[b].front, pairs[c].front, 1e-9))
                            throw Error(ErrorCode::DegenerateConfiguration, "three collinear source points");
        }
        else
        {
            bool all = true;
            for (std::size_t i = 2; i < pairs.size() && all; ++i)
                all = detail::collinear(pairs[0].front, pairs[1].front, pairs[i].front, 1e-9);
            if (all)
                throw Error(ErrorCode::DegenerateConfiguration, "source points are collinear");
        }

        const Eigen::Matrix3d tf = detail::normalizing_transform(pairs, [](const Correspondence& c) { return c.front; });
        const Eigen::Matrix3d tt = detail::normalizing_transform(pairs, [](const Correspondence& c) { return c.table; });

        Eigen::MatrixXd a(2 * pairs.size(), 9);
        for (std::size_t i = 0; i < pairs.size(); ++i)
        {
            const Eigen::Vector3d s = tf * Eigen::Vector3d(pairs[i].front.x, pairs[i].front.y, 1.0);
            const Eigen::Vector3d d = tt * Eigen::Vector3d(pairs[i].table.x, pairs[i].table.y, 1.0);
            const double x = s.x(), y = s.y(), u = d.x(), v = d.y();
            const auto r = static_cast<Eigen::Index>(2 * i);
            a.row(r) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
            a.row(r + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
        }

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        if (sv.size() >= 8 && sv(7) < 1e-10 * sv(0))
            throw Error(ErrorCode::DegenerateConfiguration, "correspondences do not determine a unique homography");
        const Eigen::VectorXd h = svd.matrixV().col(8);
        Eigen::Matrix3d hn;
        hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
        const Eigen::Matrix3d full = tt.inverse() * hn * tf;

        Calibration out;
        out.homography = Homography::from_matrix(full);
        out.correspondences.assign(pairs.begin(), pairs.end());
        double sq = 0.0;
        for (const auto& c : pairs)
            sq += squared_distance(out.homography.apply(c.front), c.table);
        out.rms_error = std::sqrt(sq / static_cast<double>(pairs.size()));
        return out;
    }

    struct Detection
    {
        int id = 0;
        ObjectClass object_class;
        TableRect bbox;
        double confidence = 1.0;

        TablePoint center() const noexcept { return bbox.center(); }

        friend bool operator==(const Detection&, const Detection&) = default;
    };

    struct ObjectDetectionSnapshot
    {
        Seconds timestamp = 0.0;
        std::vector<Detection> detections; // detector order
        std::uint64_t id = 0;              // trace seq

        void validate() const
        {
            std::set<int> ids;
            for (const auto& d : detections)
                if (!ids.insert(d.id).second)
                    throw Error(ErrorCode::InvalidParams, "duplicate detection id " + std::to_string(d.id));
        }

        const Detection* find(int id) const
        {
            for (const auto& d : detections)
                if (d.id == id)
                    return &d;
            return nullptr;
        }

        friend bool operator==(const ObjectDetectionSnapshot&, const ObjectDetectionSnapshot&) = default;
    };

    // Detection whose bbox center is closest to p, among those of the requested
    // class within max_radius. Ties go to the lowest id.
    inline int nearest_object(const TablePoint& p, const ObjectDetectionSnapshot& snapshot,
                              const std::optional<ObjectClass>& class_filter, double max_radius = 150.0)
    {
        const double limit = max_radius * max_radius;
        std::optional<std::pair<double, int>> best;
        for (const auto& d : snapshot.detections)
        {
            if (class_filter && d.object_class != *class_filter)
                continue;
            const double d2 = squared_distance(p, d.center());
            if (d2 > limit)
                continue;
            const std::pair cand{d2, d.id};
            if (!best || cand < *best)
                best = cand;
        }
        if (!best)
            throw Error(ErrorCode::NoCandidate, "no detection within " + std::to_string(max_radius) + " px");
        return best->second;
    }
} // namespace cogest
