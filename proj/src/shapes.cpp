#include "pcw/data/shapes.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace pcw {

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kBoxComposite: return "box-composite";
    case ShapeKind::kEllipsoidComposite: return "ellipsoid-composite";
    case ShapeKind::kExtrudedProfile: return "extruded-profile";
  }
  throw Error("to_string: bad ShapeKind");
}

ShapeKind shape_kind_from_string(const std::string& name) {
  if (name == "box-composite") return ShapeKind::kBoxComposite;
  if (name == "ellipsoid-composite") return ShapeKind::kEllipsoidComposite;
  if (name == "extruded-profile") return ShapeKind::kExtrudedProfile;
  throw Error("unknown shape kind: " + name);
}

namespace {

using Vec3f = Vec3<float>;

Vec3f unit_sphere_dir(RngStream& rng) {
  Vec3f u;
  do {
    u = {float(rng.normal()), float(rng.normal()), float(rng.normal())};
  } while (u.norm() < 1e-6f);
  return u.normalized();
}

/// Thomsen's approximation of the ellipsoid surface area.
float ellipsoid_area(float a, float b, float c) {
  const float p = 1.6075f;
  const float ap = std::pow(a, p), bp = std::pow(b, p), cp = std::pow(c, p);
  return 4.0f * float(std::numbers::pi) * std::pow((ap * bp + ap * cp + bp * cp) / 3.0f, 1.0f / p);
}

/// Uniform sample on an (optionally upper-half) ellipsoid surface, by
/// rejection against the area distortion of the unit-sphere parameterization.
Vec3f sample_ellipsoid_surface(float a, float b, float c, bool upper_half, RngStream& rng) {
  const float amin = std::min({a, b, c});
  while (true) {
    Vec3f u = unit_sphere_dir(rng);
    if (upper_half && u.z() < 0) u.z() = -u.z();
    const float w = std::sqrt(u.x() * u.x() / (a * a) + u.y() * u.y() / (b * b) +
                              u.z() * u.z() / (c * c));
    if (rng.uniform() <= double(amin * w)) return {a * u.x(), b * u.y(), c * u.z()};
  }
}

struct WeightedChoice {
  std::vector<float> cumulative;
  explicit WeightedChoice(const std::vector<float>& weights) {
    float acc = 0;
    for (float w : weights) cumulative.push_back(acc += w);
  }
  int draw(RngStream& rng) const {
    const float x = float(rng.uniform()) * cumulative.back();
    for (std::size_t i = 0; i < cumulative.size(); ++i)
      if (x < cumulative[i]) return int(i);
    return int(cumulative.size()) - 1;
  }
};

void require(bool ok, const char* what) {
  if (!ok) throw BadSizeParams(what);
}

Points3f gen_box_composite(const ShapeParams& p, Eigen::Index n, RngStream& rng) {
  const float hw = p.width / 2, hl = p.length / 2, hh = p.height / 2;
  require(p.step_length_ratio >= 0 && p.step_length_ratio < 1,
          "box-composite: step_length_ratio must be in [0, 1)");
  require(p.step_height_ratio > 0 && p.step_height_ratio <= 1,
          "box-composite: step_height_ratio must be in (0, 1]");
  // Tall cab section spans y in [-hl, ys]; lowered hood spans [ys, hl] up to
  // height zs. No step: ys = hl and the hood faces vanish.
  const bool stepped = p.step_length_ratio > 0 && p.step_height_ratio < 1;
  const float ys = hl - p.step_length_ratio * p.length;
  const float zs = -hh + p.step_height_ratio * p.height;

  const bool cabin = p.cabin_height > 0;
  const float ca = cabin ? p.cabin_width_ratio * hw : 0;
  const float cb = cabin ? p.cabin_length_ratio * hl : 0;
  const float cc = p.cabin_height;
  if (cabin) {
    require(ca > 0 && cb > 0, "box-composite: cabin semi-axes must be positive");
    require(ca <= hw && p.cabin_offset_y + cb <= (stepped ? ys : hl) &&
                p.cabin_offset_y - cb >= -hl,
            "box-composite: cabin must fit on the tall top face");
  }

  // Faces: bottom, tall top, hood top, step wall, front, back, two sides;
  // then the cabin dome.
  const float len_rear = ys + hl, len_front = hl - ys;
  std::vector<float> areas = {
      p.width * p.length,                         // 0 bottom
      p.width * len_rear,                         // 1 tall top
      p.width * len_front,                        // 2 hood top
      stepped ? p.width * (hh - zs) : 0.0f,       // 3 step wall at y = ys
      p.width * (zs + hh),                        // 4 front face (hood height)
      p.width * p.height,                         // 5 back face
      len_rear * p.height + len_front * (zs + hh),  // 6 side x = +hw
      len_rear * p.height + len_front * (zs + hh),  // 7 side x = -hw
  };
  if (cabin) areas.push_back(0.5f * ellipsoid_area(ca, cb, cc));
  const WeightedChoice choice(areas);
  // Splitting the L-shaped sides into their two rectangles.
  const float side_rear_frac =
      len_rear * p.height / (len_rear * p.height + len_front * (zs + hh));

  Points3f out(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int f = choice.draw(rng);
    const float u = float(rng.uniform()), v = float(rng.uniform());
    Vec3f q;
    switch (f) {
      case 0: q = {hw * (2 * u - 1), -hl + p.length * v, -hh}; break;
      case 1: q = {hw * (2 * u - 1), -hl + len_rear * v, hh}; break;
      case 2: q = {hw * (2 * u - 1), ys + len_front * v, zs}; break;
      case 3: q = {hw * (2 * u - 1), ys, zs + (hh - zs) * v}; break;
      case 4: q = {hw * (2 * u - 1), hl, -hh + (zs + hh) * v}; break;
      case 5: q = {hw * (2 * u - 1), -hl, hh * (2 * v - 1)}; break;
      case 6:
      case 7: {
        const float x = f == 6 ? hw : -hw;
        if (u < side_rear_frac)
          q = {x, -hl + len_rear * (u / side_rear_frac), hh * (2 * v - 1)};
        else
          q = {x, ys + len_front * ((u - side_rear_frac) / (1 - side_rear_frac)),
               -hh + (zs + hh) * v};
        break;
      }
      default:
        q = sample_ellipsoid_surface(ca, cb, cc, true, rng);
        q += Vec3f(0, p.cabin_offset_y, hh);
    }
    out.row(i) = q.transpose();
  }
  return out;
}

Points3f gen_ellipsoid_composite(const ShapeParams& p, Eigen::Index n, RngStream& rng) {
  // Egg-shaped body: two half-ellipsoids sharing the x-z equator, the +y
  // (front) half with semi-axis bf, the -y (rear) half with br.
  const float ba = p.width / 2, br = p.length / 2, bc = p.height / 2;
  require(p.body_front_ratio > 0 && p.body_front_ratio <= 1,
          "ellipsoid-composite: body_front_ratio must be in (0, 1]");
  const float bf = br * p.body_front_ratio;
  const bool cabin = p.cabin_height > 0;
  const float ca = cabin ? p.cabin_width_ratio * ba : 0;
  const float cb = cabin ? p.cabin_length_ratio * br : 0;
  const float cc = p.cabin_height;
  const Vec3f cabin_center(0, p.cabin_offset_y, 0.35f * p.height);
  if (cabin) {
    require(ca > 0 && cb > 0, "ellipsoid-composite: cabin semi-axes must be positive");
    const float fwd_limit = p.cabin_offset_y >= 0 ? bf : br;
    require(ca < ba && cb < br && std::abs(p.cabin_offset_y) + cb < fwd_limit,
            "ellipsoid-composite: cabin must stay inside the body footprint");
  }

  auto body_semi_y = [&](float y) { return y >= 0 ? bf : br; };
  auto inside_body = [&](const Vec3f& q) {
    const float by = body_semi_y(q.y());
    return q.x() * q.x() / (ba * ba) + q.y() * q.y() / (by * by) + q.z() * q.z() / (bc * bc) <
           1.0f;
  };
  auto inside_cabin = [&](const Vec3f& q) {
    if (!cabin) return false;
    const Vec3f d = q - cabin_center;
    return d.x() * d.x() / (ca * ca) + d.y() * d.y() / (cb * cb) + d.z() * d.z() / (cc * cc) <
           1.0f;
  };
  auto sample_body = [&](RngStream& r) {
    // Choose the half by area, then sample that half-ellipsoid (z-up sampler
    // with axes permuted so "up" is the +-y direction).
    const float area_front = 0.5f * ellipsoid_area(ba, bf, bc);
    const float area_rear = 0.5f * ellipsoid_area(ba, br, bc);
    const bool front = r.uniform() * (area_front + area_rear) < area_front;
    const Vec3f s = sample_ellipsoid_surface(ba, bc, front ? bf : br, true, r);
    return Vec3f(s.x(), front ? s.z() : -s.z(), s.y());
  };

  const float body_area = 0.5f * (ellipsoid_area(ba, bf, bc) + ellipsoid_area(ba, br, bc));
  std::vector<float> areas = {body_area};
  if (cabin) areas.push_back(ellipsoid_area(ca, cb, cc));
  const WeightedChoice choice(areas);

  Points3f out(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    while (true) {
      Vec3f q;
      if (choice.draw(rng) == 0) {
        q = sample_body(rng);
        if (inside_cabin(q)) continue;
      } else {
        q = sample_ellipsoid_surface(ca, cb, cc, false, rng) + cabin_center;
        if (inside_body(q)) continue;
      }
      out.row(i) = q.transpose();
      break;
    }
  }
  return out;
}

Points3f gen_extruded_profile(const ShapeParams& p, Eigen::Index n, RngStream& rng) {
  const float hw = p.width / 2, hl = p.length / 2, hh = p.height / 2;
  require(p.nose_z > -hh && p.nose_z < hh && p.tail_z > -hh && p.tail_z < hh,
          "extruded-profile: silhouette breaks must sit between floor and roof");
  require(p.top_rear_y > -hl && p.top_front_y < hl && p.top_rear_y < p.top_front_y,
          "extruded-profile: roof line must be ordered inside the body");

  using Vec2f = Eigen::Vector2f;
  const std::vector<Vec2f> poly = {{-hl, -hh},          {hl, -hh},         {hl, p.nose_z},
                                   {p.top_front_y, hh}, {p.top_rear_y, hh}, {-hl, p.tail_z}};
  const int nv = int(poly.size());
  for (int i = 0; i < nv; ++i) {
    const Vec2f e0 = poly[(i + 1) % nv] - poly[i];
    const Vec2f e1 = poly[(i + 2) % nv] - poly[(i + 1) % nv];
    require(e0.x() * e1.y() - e0.y() * e1.x() > 0, "extruded-profile: silhouette must be convex");
  }

  float poly_area = 0;
  std::vector<float> tri_areas;  // fan (v0, vi, vi+1)
  for (int i = 1; i + 1 < nv; ++i) {
    const Vec2f a = poly[i] - poly[0], b = poly[i + 1] - poly[0];
    const float area = 0.5f * (a.x() * b.y() - a.y() * b.x());
    tri_areas.push_back(area);
    poly_area += area;
  }
  std::vector<float> areas = {poly_area, poly_area};  // caps at x = +-hw
  for (int i = 0; i < nv; ++i)
    areas.push_back((poly[(i + 1) % nv] - poly[i]).norm() * p.width);  // side strips
  const WeightedChoice choice(areas);
  const WeightedChoice tri_choice(tri_areas);

  Points3f out(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int f = choice.draw(rng);
    Vec3f q;
    if (f < 2) {
      const int t = tri_choice.draw(rng);
      float u = float(rng.uniform()), v = float(rng.uniform());
      if (u + v > 1) {
        u = 1 - u;
        v = 1 - v;
      }
      const Vec2f yz = poly[0] + u * (poly[t + 1] - poly[0]) + v * (poly[t + 2] - poly[0]);
      q = {f == 0 ? hw : -hw, yz.x(), yz.y()};
    } else {
      const int e = f - 2;
      const float u = float(rng.uniform());
      const Vec2f yz = poly[e] + u * (poly[(e + 1) % nv] - poly[e]);
      q = {hw * (2 * float(rng.uniform()) - 1), yz.x(), yz.y()};
    }
    out.row(i) = q.transpose();
  }
  return out;
}

}  // namespace

Points3f gen_shape(ShapeKind kind, const ShapeParams& p, Eigen::Index n_points, RngStream& rng) {
  if (n_points < 1) throw BadSizeParams("gen_shape: need at least one sample");
  require(p.length > 0 && p.width > 0 && p.height > 0, "gen_shape: dimensions must be positive");
  require(p.cabin_height >= 0, "gen_shape: cabin height must be nonnegative");
  switch (kind) {
    case ShapeKind::kBoxComposite: return gen_box_composite(p, n_points, rng);
    case ShapeKind::kEllipsoidComposite: return gen_ellipsoid_composite(p, n_points, rng);
    case ShapeKind::kExtrudedProfile: return gen_extruded_profile(p, n_points, rng);
  }
  throw Error("gen_shape: bad ShapeKind");
}

ShapeParams draw_shape_params(ShapeKind kind, RngStream& rng, bool fore_aft_symmetric) {
  ShapeParams p;
  p.length = float(rng.uniform(3.5, 5.5));
  p.width = float(rng.uniform(1.6, 2.2));
  p.height = float(rng.uniform(1.3, 2.0));
  switch (kind) {
    case ShapeKind::kBoxComposite:
    case ShapeKind::kEllipsoidComposite: {
      p.cabin_width_ratio = float(rng.uniform(0.55, 0.8));
      p.cabin_length_ratio = float(rng.uniform(0.3, 0.45));
      p.cabin_height = float(rng.uniform(0.4, 0.55)) * p.height;
      const bool egg = kind == ShapeKind::kEllipsoidComposite;
      if (fore_aft_symmetric) {
        p.cabin_offset_y = 0;
        p.body_front_ratio = 1;
      } else if (egg) {
        p.body_front_ratio = float(rng.uniform(0.7, 0.85));
        // Cabin sits toward the rear, clear of the shorter nose.
        const float max_off = (0.95f - p.cabin_length_ratio) * p.length / 2;
        p.cabin_offset_y = -std::min(float(rng.uniform(0.16, 0.26)) * p.length, max_off);
      } else {
        // Truck-like stepped hood; cabin centered on the tall section.
        p.step_length_ratio = float(rng.uniform(0.2, 0.35));
        p.step_height_ratio = float(rng.uniform(0.5, 0.7));
        const float hl = p.length / 2;
        const float ys = hl - p.step_length_ratio * p.length;
        const float cb = p.cabin_length_ratio * hl;
        const float margin = 0.05f * hl;
        const float lo = -hl + cb + margin, hi = ys - cb - margin;
        p.cabin_offset_y = float(rng.uniform(lo, std::max(lo, hi)));
      }
      break;
    }
    case ShapeKind::kExtrudedProfile: {
      const float hh = p.height / 2, hl = p.length / 2;
      p.nose_z = -hh + float(rng.uniform(0.3, 0.42)) * p.height;
      p.top_front_y = float(rng.uniform(0.05, 0.2)) * hl;
      if (fore_aft_symmetric) {
        p.tail_z = p.nose_z;
        p.top_rear_y = -p.top_front_y;
      } else {
        p.tail_z = -hh + float(rng.uniform(0.72, 0.95)) * p.height;
        p.top_rear_y = -float(rng.uniform(0.3, 0.5)) * hl;
      }
      break;
    }
  }
  return p;
}

}  // namespace pcw
