#include "oracles.hpp"
#include "sharpdepth/errors.hpp"
#include "sharpdepth/io.hpp"

#include <gtest/gtest.h>
#include <opencv2/imgcodecs.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

using namespace sharpdepth;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sharpdepth_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_F(IoTest, PfmRoundTripIsBitwise) {
  std::mt19937_64 rng(11);
  auto d = oracle::random_depth(rng, 7, 13);
  d.values(2, 3) = std::numeric_limits<double>::quiet_NaN();
  d.values(4, 4) = 0.0;
  // Values representable in float32, so the round trip is exact.
  d.values = d.values.cast<float>().cast<double>();
  io::write_pfm(dir_ / "a.pfm", d);
  const auto back = io::read_pfm(dir_ / "a.pfm");
  ASSERT_EQ(back.rows(), 7);
  ASSERT_EQ(back.cols(), 13);
  EXPECT_FALSE(back.valid(2, 3));
  EXPECT_FALSE(back.valid(4, 4));
  EXPECT_TRUE(back.valid(0, 0));
  EXPECT_EQ(back.values(6, 12), d.values(6, 12));
  EXPECT_EQ(back.values(0, 0), d.values(0, 0));

  io::write_pfm(dir_ / "b.pfm", back);
  EXPECT_EQ(slurp(dir_ / "a.pfm"), slurp(dir_ / "b.pfm"));
}

TEST_F(IoTest, PfmStoresRowsBottomUpLittleEndian) {
  Grid g(2, 1);
  g << 1.0, 2.0;
  io::write_pfm(dir_ / "s.pfm", DepthMap(g));
  const std::string bytes = slurp(dir_ / "s.pfm");
  const std::string header = "Pf\n1 2\n-1.0\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  float first = 0;
  std::memcpy(&first, bytes.data() + header.size(), 4);
  EXPECT_EQ(first, 2.0f);
}

TEST_F(IoTest, PfmReadsBigEndian) {
  std::ofstream out(dir_ / "be.pfm", std::ios::binary);
  out << "Pf\n2 1\n1.0\n";
  for (float f : {1.5f, 2.25f}) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    const unsigned char b[4] = {static_cast<unsigned char>(bits >> 24), static_cast<unsigned char>(bits >> 16),
                                static_cast<unsigned char>(bits >> 8), static_cast<unsigned char>(bits)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
  out.close();
  const auto d = io::read_pfm(dir_ / "be.pfm");
  EXPECT_EQ(d.values(0, 0), 1.5);
  EXPECT_EQ(d.values(0, 1), 2.25);
}

TEST_F(IoTest, PfmErrors) {
  EXPECT_THROW(io::read_pfm(dir_ / "missing.pfm"), IoError);
  {
    std::ofstream out(dir_ / "color.pfm", std::ios::binary);
    out << "PF\n1 1\n-1.0\n";
  }
  EXPECT_THROW(io::read_pfm(dir_ / "color.pfm"), IoError);
  {
    std::ofstream out(dir_ / "short.pfm", std::ios::binary);
    out << "Pf\n4 4\n-1.0\nab";
  }
  EXPECT_THROW(io::read_pfm(dir_ / "short.pfm"), IoError);
  EXPECT_THROW(io::read_depth(dir_ / "depth.exr"), IoError);
}

TEST_F(IoTest, PngMillimeterConvention) {
  cv::Mat m(1, 3, CV_16UC1);
  m.at<std::uint16_t>(0, 0) = 2500;
  m.at<std::uint16_t>(0, 1) = 0;
  m.at<std::uint16_t>(0, 2) = 1;
  cv::imwrite((dir_ / "d.png").string(), m);
  const auto d = io::read_depth(dir_ / "d.png");
  EXPECT_DOUBLE_EQ(d.values(0, 0), 2.5);
  EXPECT_TRUE(d.valid(0, 0));
  EXPECT_FALSE(d.valid(0, 1));
  EXPECT_DOUBLE_EQ(d.values(0, 2), 0.001);
}

TEST_F(IoTest, PngRejects8Bit) {
  cv::Mat m(2, 2, CV_8UC1, cv::Scalar(3));
  cv::imwrite((dir_ / "d8.png").string(), m);
  EXPECT_THROW(io::read_depth_png_mm(dir_ / "d8.png"), IoError);
}

TEST_F(IoTest, PfmAndPngEncodingsAgree) {
  std::mt19937_64 rng(5);
  const auto d = oracle::random_depth(rng, 16, 16, 0.5, 9.0);
  io::write_pfm(dir_ / "x.pfm", d);
  io::write_depth_png_mm(dir_ / "x.png", d);
  const auto a = io::read_depth(dir_ / "x.pfm");
  const auto b = io::read_depth(dir_ / "x.png");
  EXPECT_TRUE((a.valid == b.valid).all());
  EXPECT_LE((a.values - b.values).abs().maxCoeff(), 0.0005 + 1e-9);
}

TEST_F(IoTest, ColorPngRoundTrip) {
  ColorImage img{2, 3, {}};
  for (int i = 0; i < 18; ++i) img.data.push_back(static_cast<float>(i * 15) / 255.0f);
  io::write_color_png(dir_ / "c.png", img);
  const auto back = io::read_color_png(dir_ / "c.png");
  ASSERT_EQ(back.rows, 2);
  ASSERT_EQ(back.cols, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_FLOAT_EQ(back.data[i], img.data[i]);
}

TEST_F(IoTest, PlyHeaderAndRows) {
  PointCloud cloud;
  cloud.points.resize(2, 3);
  cloud.points << 0, 0, 2, 6, 2, 2;
  io::write_ply(dir_ / "p.ply", cloud);
  const auto text = slurp(dir_ / "p.ply");
  EXPECT_NE(text.find("element vertex 2\n"), std::string::npos);
  EXPECT_EQ(text.find("property uchar red"), std::string::npos);
  EXPECT_NE(text.find("end_header\n0 0 2\n6 2 2\n"), std::string::npos);

  cloud.colors.emplace(2, 3);
  *cloud.colors << 1, 0, 0, 0, 0.5, 1;
  io::write_ply(dir_ / "q.ply", cloud);
  const auto colored = slurp(dir_ / "q.ply");
  EXPECT_NE(colored.find("property uchar blue\nend_header\n0 0 2 255 0 0\n6 2 2 0 128 255\n"), std::string::npos);
}
