#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dicoderma/anonymize.hpp"
#include "dicoderma/cli.hpp"
#include "part10_walker.hpp"
#include "test_support.hpp"

using namespace dicoderma;
using namespace dicoderma::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

ClinicalMetadata read_metadata(const fs::path& p) {
  return decode_metadata(*read_user_comment(parse_jpeg(read_file(p))));
}

}  // namespace

TEST_CASE("tag then show") {
  TempDir dir;
  copy_fixture(dir / "img.jpg", "camera_le.jpg");
  const auto tagged = run({"tag", (dir / "img.jpg").string(), "PatientID=P001", "StudyDescription=lichen planus"});
  REQUIRE(tagged.code == 0);
  CHECK(fs::exists(dir / "img.tagged.jpg"));
  CHECK(read_file(dir / "img.jpg") == load_fixture("camera_le.jpg"));

  const auto shown = run({"show", (dir / "img.tagged.jpg").string()});
  CHECK(shown.code == 0);
  CHECK(shown.out.find("P001") != std::string::npos);
  CHECK(shown.out.find("lichen planus") != std::string::npos);

  const auto json = run({"show", "--format", "json", (dir / "img.tagged.jpg").string()});
  CHECK(json.out == *read_user_comment(parse_jpeg(read_file(dir / "img.tagged.jpg"))) + "\n");
  CHECK(json.out == R"({"PatientID":"P001","StudyDescription":"lichen planus","dicoderma":"1.0"})" "\n");
}

TEST_CASE("tag validation and usage errors") {
  TempDir dir;
  copy_fixture(dir / "img.jpg", "gray_8x8.jpg");
  const auto bad = run({"tag", (dir / "img.jpg").string(), "PatientSex=female"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("CS-codeset") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "img.tagged.jpg"));

  CHECK(run({"tag", (dir / "img.jpg").string(), "Modality=OT"}).code == 2);
  CHECK(run({"tag", (dir / "img.jpg").string(), "no-equals-sign"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"tag", (dir / "missing.jpg").string(), "PatientID=1"}).code == 1);
  CHECK(run({"tag", fixture("not_a_jpeg.gif").string(), "PatientID=1", "-o", (dir / "x.jpg").string()}).code == 1);
}

TEST_CASE("tagging is idempotent and merges") {
  TempDir dir;
  copy_fixture(dir / "img.jpg", "color_2x1.jpg");
  const std::string img = (dir / "img.jpg").string();
  REQUIRE(run({"tag", img, "PatientID=P001", "-o", (dir / "a.jpg").string()}).code == 0);
  REQUIRE(run({"tag", img, "PatientID=P001", "-o", (dir / "b.jpg").string()}).code == 0);
  CHECK(read_file(dir / "a.jpg") == read_file(dir / "b.jpg"));
  REQUIRE(run({"tag", (dir / "a.jpg").string(), "PatientID=P001", "-o", (dir / "c.jpg").string()}).code == 0);
  CHECK(read_file(dir / "a.jpg") == read_file(dir / "c.jpg"));

  REQUIRE(run({"tag", (dir / "a.jpg").string(), "--in-place", "diagnosis=psoriasis", "patient_sex=M",
               "--date-time", "2021-03-01T09:30:00"}).code == 0);
  const auto m = read_metadata(dir / "a.jpg");
  CHECK(m.patient_id == "P001");
  CHECK(m.study_description == "psoriasis");
  CHECK(m.patient_sex == "M");
  CHECK(m.study_date == "20210301");
  CHECK(m.study_time == "093000");

  REQUIRE(run({"tag", (dir / "a.jpg").string(), "--in-place", "PatientSex="}).code == 0);
  CHECK_FALSE(read_metadata(dir / "a.jpg").patient_sex);
  CHECK(run({"tag", img, "--date-time", "yesterday"}).code == 2);
}

TEST_CASE("iso date-time splitting") {
  std::string da, tm;
  CHECK(cli::split_iso_datetime("2021-03-01T09:30:00", da, tm));
  CHECK(da == "20210301");
  CHECK(tm == "093000");
  CHECK(cli::split_iso_datetime("2021-03-01 09:30", da, tm));
  CHECK(tm == "093000");
  CHECK(cli::split_iso_datetime("2021-03-01", da, tm));
  CHECK(tm.empty());
  CHECK_FALSE(cli::split_iso_datetime("2021-13-01", da, tm));
  CHECK_FALSE(cli::split_iso_datetime("01/03/2021", da, tm));
}

TEST_CASE("show on untagged input") {
  const auto r = run({"show", fixture("camera_le.jpg").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("untagged") != std::string::npos);
}

TEST_CASE("search") {
  TempDir dir;
  ClinicalMetadata lp;
  lp.study_description = "lichen planus";
  ClinicalMetadata other;
  other.study_description = "eczema";
  other.study_date = "20200101";
  write_tagged(dir / "x/1.jpg", "gray_8x8.jpg", lp);
  write_tagged(dir / "2.jpg", "gray_8x8.jpg", lp);
  write_tagged(dir / "y/3.jpg", "gray_8x8.jpg", other);
  copy_fixture(dir / "4.jpg", "camera_le.jpg");

  const auto r = run({"search", dir.path().string(), "--contains", "diagnosis=LICHEN"});
  CHECK(r.code == 0);
  CHECK(r.out == (dir / "2.jpg").generic_string() + "\n" + (dir / "x/1.jpg").generic_string() + "\n");

  const auto dated = run({"search", dir.path().string(), "--from", "2019-12-31", "--to", "2020-01-01", "--json"});
  const auto records = nlohmann::json::parse(dated.out);
  REQUIRE(records.size() == 1);
  CHECK(records[0]["metadata"]["StudyDescription"] == "eczema");

  CHECK(run({"search", dir.path().string(), "--where", "Colour=red"}).code == 2);
  CHECK(run({"search", dir.path().string(), "--from", "soon"}).code == 2);
  CHECK(run({"search", (dir / "nope").string()}).code == 1);

  TempDir empty;
  const auto none = run({"search", empty.path().string()});
  CHECK(none.code == 0);
  CHECK(none.out.empty());
}

TEST_CASE("convert") {
  TempDir dir;
  ClinicalMetadata m;
  m.patient_id = "P001";
  write_tagged(dir / "img.jpg", "color_2x1.jpg", m);
  const auto r = run({"convert", (dir / "img.jpg").string(), "--seed", "9"});
  REQUIRE(r.code == 0);
  const Bytes file = read_file(dir / "img.dcm");
  CHECK(to_string(ByteView(file).subspan(128, 4)) == "DICM");
  const auto walked = walk_part10(file);
  CHECK(walked.text(0x00100020) == "P001");
  CHECK(r.out == walked.text(0x00080018).substr(0, r.out.size() - 1) + "\n");

  // Same seed, same bytes.
  REQUIRE(run({"convert", (dir / "img.jpg").string(), "--seed", "9", "-o", (dir / "again.dcm").string()}).code == 0);
  CHECK(read_file(dir / "again.dcm") == file);

  copy_fixture(dir / "prog.jpg", "progressive.jpg");
  CHECK(run({"convert", (dir / "prog.jpg").string(), "--allow-untagged"}).code == 1);
  copy_fixture(dir / "plain.jpg", "gray_8x8.jpg");
  CHECK(run({"convert", (dir / "plain.jpg").string()}).code == 1);
  CHECK_FALSE(fs::exists(dir / "plain.dcm"));
  CHECK(run({"convert", (dir / "plain.jpg").string(), "--allow-untagged"}).code == 0);
  CHECK(walk_part10(read_file(dir / "plain.dcm")).text(0x00100020).empty());
  CHECK(run({"convert", (dir / "img.jpg").string(), "--uid-root", "1.02"}).code == 2);
}

TEST_CASE("anonymize") {
  TempDir dir;
  ClinicalMetadata m;
  m.patient_id = "MRN-004512";
  m.patient_name = "DOE^JANE";
  write_tagged(dir / "img.jpg", "camera_le.jpg", m);
  {
    std::ofstream(dir / "key") << "clinic-secret\n";
  }
  const std::string key = (dir / "key").string();

  ::unsetenv(cli::kSecretEnv);
  CHECK(run({"anonymize", (dir / "img.jpg").string()}).code == 1);

  const auto r = run({"anonymize", (dir / "img.jpg").string(), "--secret-file", key});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("clinic-secret") == std::string::npos);
  const Bytes out = read_file(dir / "img.anon.jpg");
  CHECK_FALSE(contains_bytes(out, "MRN-004512"));
  CHECK_FALSE(contains_bytes(out, "DOE^JANE"));
  const auto anon = read_metadata(dir / "img.anon.jpg");
  CHECK(anon.patient_id == "71b1b4f56ec194a0");
  CHECK_FALSE(anon.patient_name);
  CHECK(anon.deidentified);

  // Second pass is a no-op.
  REQUIRE(run({"anonymize", (dir / "img.anon.jpg").string(), "--in-place", "--secret-file", key}).code == 0);
  CHECK(read_file(dir / "img.anon.jpg") == out);

  ::setenv(cli::kSecretEnv, "clinic-secret", 1);
  REQUIRE(run({"anonymize", (dir / "img.jpg").string(), "-o", (dir / "env.jpg").string(), "--keep-name",
               "--dates", "drop"}).code == 0);
  ::unsetenv(cli::kSecretEnv);
  const auto kept = read_metadata(dir / "env.jpg");
  CHECK(kept.patient_name == "DOE^JANE");
  CHECK(kept.patient_id == "71b1b4f56ec194a0");

  CHECK(run({"anonymize", (dir / "img.jpg").string(), "--dates", "sometimes"}).code == 2);
}

TEST_CASE("detect exit codes") {
  TempDir dir;
  write_tagged(dir / "tagged.jpg", "camera_le.jpg", ClinicalMetadata{});
  copy_fixture(dir / "camera.jpg", "camera_le.jpg");
  copy_fixture(dir / "bad.jpg", "bad_exif.jpg");
  const std::string tagged = (dir / "tagged.jpg").string();
  const std::string camera = (dir / "camera.jpg").string();
  const std::string bad = (dir / "bad.jpg").string();

  auto t = run({"detect", tagged});
  CHECK(t.code == 3);
  CHECK(t.out == tagged + "\tTAGGED\n");
  auto c = run({"detect", camera});
  CHECK(c.code == 0);
  CHECK(c.out == camera + "\tCLEAN\n");
  CHECK(run({"detect", camera, tagged}).code == 3);
  auto u = run({"detect", camera, tagged, bad, (dir / "missing.jpg").string()});
  CHECK(u.code == 1);
  CHECK(u.out.find(bad + "\tUNREADABLE") != std::string::npos);
  CHECK(run({"detect", fixture("not_a_jpeg.gif").string()}).code == 0);
  const auto j = nlohmann::json::parse(run({"detect", "--json", tagged, camera}).out);
  CHECK(j.size() == 2);
}

TEST_CASE("serve refuses a public bind without the opt-in") {
  TempDir dir;
  CHECK(run({"serve", dir.path().string(), "--bind", "0.0.0.0"}).code == 2);
  CHECK(run({"serve", (dir / "missing").string()}).code == 1);
}
