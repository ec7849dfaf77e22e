#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pcw/baseline/icp.hpp"
#include "pcw/data/dataset.hpp"

using namespace pcw;

namespace {

bool is_rotation(const Mat3<double>& r, double tol = 1e-9) {
  return std::abs(r.determinant() - 1.0) < tol &&
         (r.transpose() * r - Mat3<double>::Identity()).norm() < tol;
}

Points3<double> shifted(const Points3<double>& x, double dx, double dy, double dz) {
  Points3<double> out = x;
  out.rowwise() += Eigen::RowVector3d(dx, dy, dz);
  return out;
}

}  // namespace

TEST_CASE("aligning a cloud to itself returns the exact identity") {
  RngStream rng = derive_stream(1, {kTagEval});
  const auto cloud = oracle::random_cloud<double>(300, rng);
  const auto result = icp_point_to_point(cloud, cloud, Pose<double>{}, IcpParams<double>{});
  CHECK(result.rmse == 0.0);
  CHECK(result.iterations == 1);
  CHECK(result.pose.R == Mat3<double>::Identity());
  CHECK(result.pose.t == Vec3<double>::Zero());
}

TEST_CASE("a known small transform is recovered to high precision") {
  RngStream rng = derive_stream(2, {kTagEval});
  const auto src = oracle::random_cloud<double>(400, rng, -0.7, 0.7);
  Pose<double> gt;
  gt.R = rot_z(5.0 * std::numbers::pi / 180.0);
  gt.t = Vec3<double>(0.01, -0.02, 0.015);
  const Points3<double> tgt = gt.apply(src);

  const auto result = icp_point_to_point(src, tgt, Pose<double>{}, IcpParams<double>{});
  CHECK(angle_between(result.pose.R, gt.R) < 1e-3);
  CHECK((result.pose.t - gt.t).norm() < 1e-4);
  CHECK(is_rotation(result.pose.R));
}

TEST_CASE("clouds farther apart than the threshold raise NoCorrespondences") {
  RngStream rng = derive_stream(3, {kTagEval});
  const auto src = oracle::random_cloud<double>(50, rng);
  const auto tgt = shifted(src, 100.0, 0.0, 0.0);
  CHECK_THROWS_AS(icp_point_to_point(src, tgt, Pose<double>{}, IcpParams<double>{}),
                  NoCorrespondences);
}

TEST_CASE("collinear correspondences raise DegenerateAlignment") {
  Points3<double> line(20, 3);
  for (int i = 0; i < 20; ++i) line.row(i) = Eigen::RowVector3d(0.0, 0.0, 0.01 * i);
  const auto tgt = shifted(line, 0.05, 0.0, 0.0);
  CHECK_THROWS_AS(icp_point_to_point(line, tgt, Pose<double>{}, IcpParams<double>{}),
                  DegenerateAlignment);
}

TEST_CASE("invalid parameters are rejected") {
  RngStream rng = derive_stream(4, {kTagEval});
  const auto cloud = oracle::random_cloud<double>(10, rng);
  IcpParams<double> params;
  params.max_iterations = 0;
  CHECK_THROWS_AS(icp_point_to_point(cloud, cloud, Pose<double>{}, params), BadSizeParams);
}

TEST_CASE("correspondence RMSE never increases on a full-overlap run") {
  RngStream rng = derive_stream(5, {kTagEval});
  const auto src = oracle::random_cloud<double>(500, rng);
  Pose<double> gt;
  gt.R = rot_y(10.0 * std::numbers::pi / 180.0) * rot_z(-7.0 * std::numbers::pi / 180.0);
  gt.t = Vec3<double>(0.05, 0.02, -0.04);
  const Points3<double> tgt = gt.apply(src);

  IcpParams<double> params;
  params.max_correspondence_distance = 10.0;  // full correspondence: the classic monotone case
  const auto result = icp_point_to_point(src, tgt, Pose<double>{}, params);
  REQUIRE(result.rmse_history.size() >= 2);
  for (std::size_t i = 1; i < result.rmse_history.size(); ++i)
    CHECK(result.rmse_history[i] <= result.rmse_history[i - 1] + 1e-12);
  CHECK(result.rmse < 1e-9);
}

TEST_CASE("reflection correction keeps the rotation proper on mirrored planar input") {
  RngStream rng = derive_stream(6, {kTagEval});
  Points3<double> src(60, 3);
  for (int i = 0; i < 60; ++i)
    src.row(i) = Eigen::RowVector3d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0.0);
  Points3<double> tgt = src;
  tgt.col(0) *= -1.0;  // a mirror image: the SVD's naive solution is a reflection
  IcpParams<double> params;
  params.max_correspondence_distance = 10.0;
  const auto result = icp_point_to_point(src, tgt, Pose<double>{}, params);
  CHECK(is_rotation(result.pose.R));
}

TEST_CASE("accumulate_poses handles the trivial cases") {
  RngStream rng = derive_stream(7, {kTagEval});
  const auto cloud = oracle::random_cloud<double>(200, rng);
  SUBCASE("single view") {
    const auto acc = accumulate_poses<double>({cloud}, IcpParams<double>{});
    CHECK(acc.reference == 0);
    REQUIRE(acc.poses[0].has_value());
    CHECK(acc.poses[0]->R == Mat3<double>::Identity());
    CHECK(acc.poses[0]->t == Vec3<double>::Zero());
  }
  SUBCASE("three identical clouds") {
    const auto acc = accumulate_poses<double>({cloud, cloud, cloud}, IcpParams<double>{});
    CHECK(acc.reference == 1);
    for (const auto& pose : acc.poses) {
      REQUIRE(pose.has_value());
      CHECK(pose->R == Mat3<double>::Identity());
      CHECK(pose->t == Vec3<double>::Zero());
    }
  }
  SUBCASE("a broken link leaves downstream views unaligned") {
    const auto far = shifted(cloud, 100.0, 0.0, 0.0);
    const auto acc = accumulate_poses<double>({cloud, cloud, far}, IcpParams<double>{});
    CHECK(acc.poses[0].has_value());
    CHECK(acc.poses[1].has_value());
    CHECK_FALSE(acc.poses[2].has_value());
  }
}

TEST_CASE("accumulated poses track ground truth on a noiseless walk sequence") {
  RngStream rng = derive_stream(8, {kTagData, 0});
  const ShapeParams params = draw_shape_params(ShapeKind::kBoxComposite, rng);
  Points3f gt_shape = gen_shape(ShapeKind::kBoxComposite, params, 4096, rng);
  PoseDistribution dist;
  dist.mode = PoseMode::kWalk;
  const auto record =
      gen_instance("walk", ShapeKind::kBoxComposite, std::move(gt_shape), 5, dist,
                   GridResolution<float>{0.0087266462f, 0.0087266462f}, 0.0f, rng);

  std::vector<Points3<double>> views;
  for (const auto& view : record.views) views.push_back(view.scan.cast<double>());
  const auto acc = accumulate_poses(views, IcpParams<double>{});
  const std::size_t ref = acc.reference;
  CHECK(ref == 2);
  const Pose<double> gt_ref{record.views[ref].pose.R.cast<double>(),
                            record.views[ref].pose.t.cast<double>()};
  for (std::size_t i = 0; i < views.size(); ++i) {
    REQUIRE(acc.poses[i].has_value());
    const Pose<double> gt_i{record.views[i].pose.R.cast<double>(),
                            record.views[i].pose.t.cast<double>()};
    const Pose<double> gt_rel = gt_ref * gt_i.inverse();
    CHECK(angle_between(acc.poses[i]->R, gt_rel.R) < 2.0 * std::numbers::pi / 180.0);
    CHECK((acc.poses[i]->t - gt_rel.t).norm() < 0.1);
  }
}

TEST_CASE("fuse_clouds concatenates transformed views") {
  RngStream rng = derive_stream(9, {kTagEval});
  const auto a = oracle::random_cloud<double>(30, rng);
  const auto b = oracle::random_cloud<double>(50, rng);
  SUBCASE("one view with identity pose is returned unchanged") {
    const auto fused = fuse_clouds<double>({a}, {Pose<double>{}});
    CHECK(fused == a);
  }
  SUBCASE("sizes add up and transforms are applied") {
    Pose<double> move;
    move.t = Vec3<double>(1.0, 2.0, 3.0);
    const auto fused = fuse_clouds<double>({a, b}, {Pose<double>{}, move});
    REQUIRE(fused.rows() == 80);
    CHECK(fused.topRows(30) == a);
    CHECK(fused.bottomRows(50).isApprox(move.apply(b)));
  }
  SUBCASE("size mismatch is rejected") {
    CHECK_THROWS_AS(fuse_clouds<double>({a, b}, {Pose<double>{}}), BadSizeParams);
  }
}

TEST_CASE("fusing with ground-truth poses stays within the per-view CD bound") {
  RngStream rng = derive_stream(10, {kTagData, 1});
  const ShapeParams params = draw_shape_params(ShapeKind::kEllipsoidComposite, rng);
  Points3f gt_shape = gen_shape(ShapeKind::kEllipsoidComposite, params, 2048, rng);
  PoseDistribution dist;
  const auto record =
      gen_instance("wide", ShapeKind::kEllipsoidComposite, std::move(gt_shape), 4, dist,
                   GridResolution<float>{0.0087266462f, 0.0087266462f}, 0.01f, rng);

  // Map every view into view 0's frame with GT poses; the fused cloud's CD to
  // the posed GT is a size-weighted mean of per-view CDs, hence <= their max.
  const Pose<float> to_ref = record.views[0].pose;
  std::vector<Points3<double>> views;
  std::vector<Pose<double>> poses;
  for (const auto& view : record.views) {
    views.push_back(view.scan.cast<double>());
    const Pose<float> rel = to_ref * view.pose.inverse();
    poses.push_back(Pose<double>{rel.R.cast<double>(), rel.t.cast<double>()});
  }
  const Points3<double> gt_ref = to_ref.apply(record.gt_canonical).cast<double>();

  double max_cd = 0.0;
  for (std::size_t i = 0; i < views.size(); ++i)
    max_cd = std::max(max_cd,
                      oracle::brute_directed_chamfer(poses[i].apply(views[i]), gt_ref));
  const auto fused = fuse_clouds(views, poses);
  CHECK(oracle::brute_directed_chamfer(fused, gt_ref) <= max_cd + 1e-12);
}
