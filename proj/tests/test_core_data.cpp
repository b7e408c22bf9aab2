#include "masstest/core_data.hpp"

#include "helpers.hpp"
#include "masstest/error.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace masstest;
using testutil::TempDir;

TEST(LabelVector, NamesCodedInLexicographicOrder) {
  const auto l = LabelVector::from_names({"z", "a", "z", "a", "a"});
  EXPECT_EQ(l.class_names()[0], "a");
  EXPECT_EQ(l.class_names()[1], "z");
  EXPECT_EQ(l[0], 1);
  EXPECT_EQ(l[1], 0);
  EXPECT_EQ(l.count(0), 3u);
  EXPECT_EQ(l.names(), (std::vector<std::string>{"z", "a", "z", "a", "a"}));
  EXPECT_THROW(LabelVector::from_names({"a", "a"}), DataError);
  EXPECT_THROW(LabelVector::from_names({"a", "b", "c"}), DataError);
  EXPECT_THROW(LabelVector::from_codes({0, 2}), DataError);
  EXPECT_THROW(LabelVector::from_codes({1, 1}), DataError);
}

TEST(LabelVector, Permuted) {
  const auto l = LabelVector::from_codes({0, 0, 1, 1});
  const std::vector<std::size_t> order{2, 0, 3, 1};
  const auto p = l.permuted(order);
  EXPECT_EQ(std::vector<int>(p.codes().begin(), p.codes().end()), (std::vector<int>{1, 0, 1, 0}));
}

TEST(TFRTensor, IndexingAndSlices) {
  const auto t = testutil::random_tensor({4, 3, 2, 5}, 1);
  EXPECT_EQ(t.at(2, 1, 1, 3), t.power()[((2 * 3 + 1) * 2 + 1) * 5 + 3]);
  const auto slab = t.slab(3, 2);
  EXPECT_EQ(slab.size(), 10u);
  EXPECT_EQ(slab[7], t.at(3, 2, 1, 2));
  EXPECT_EQ(t.trial(1)[flat_index(t.shape(), {2, 0, 4})], t.at(1, 2, 0, 4));
  for (std::size_t i = 0; i < t.shape().variables(); ++i) {
    EXPECT_EQ(flat_index(t.shape(), variable_at(t.shape(), i)), i);
  }
}

TEST(TFRTensor, SliceChannel) {
  const auto t = testutil::random_tensor({4, 3, 2, 5}, 2);
  const auto s = slice_channel(t, 1);
  EXPECT_EQ(s.trials, 4u);
  EXPECT_EQ(s.values.size(), 40u);
  EXPECT_EQ(s.trial(2)[6], t.at(2, 1, 1, 1));
  EXPECT_THROW(slice_channel(t, 3), std::out_of_range);
}

TEST(TFRTensor, Validation) {
  const auto labels = testutil::balanced_labels(2);
  const auto names = testutil::channel_names(1);
  EXPECT_THROW(TFRTensor({2, 1, 1, 2}, {1, 2, 3}, {1}, {0, 1}, names, labels), DataError);
  EXPECT_THROW(TFRTensor({2, 1, 1, 2}, {1, 2, 3, -1}, {1}, {0, 1}, names, labels), DataError);
  EXPECT_THROW(TFRTensor({2, 1, 1, 2}, {1, 2, 3, NAN}, {1}, {0, 1}, names, labels), DataError);
  EXPECT_THROW(TFRTensor({2, 1, 1, 2}, {1, 2, 3, 4}, {1}, {1, 0}, names, labels), DataError);
  EXPECT_THROW(TFRTensor({2, 2, 1, 1}, {1, 2, 3, 4}, {1}, {0}, {"x", "x"}, labels), DataError);
  EXPECT_THROW(TFRTensor({3, 1, 1, 1}, {1, 2, 3}, {1}, {0}, names, labels), DataError);
  SensorLayout bad{{"E0"}, {{0.0, INFINITY}}};
  EXPECT_THROW(TFRTensor({2, 1, 1, 1}, {1, 2}, {1}, {0}, names, labels, bad), DataError);
}

TEST(Dataset, TfrRoundTrip) {
  TempDir dir("tfr");
  SensorLayout layout{testutil::channel_names(3), {{0, 0}, {1, 0}, {0.5, 1}}};
  const auto t = testutil::random_tensor({6, 3, 4, 5}, 3).with_layout(layout);
  save_dataset(t, dir.path() / "ds");
  const auto back = load_tfr(dir.path() / "ds");
  EXPECT_EQ(back.shape(), t.shape());
  EXPECT_TRUE(std::equal(t.power().begin(), t.power().end(), back.power().begin()));
  EXPECT_EQ(back.freq_axis(), t.freq_axis());
  EXPECT_EQ(back.time_axis(), t.time_axis());
  EXPECT_EQ(back.channel_names(), t.channel_names());
  EXPECT_EQ(back.labels(), t.labels());
  ASSERT_TRUE(back.layout().has_value());
  EXPECT_EQ(*back.layout(), layout);
}

TEST(Dataset, RawRoundTripAndKindCheck) {
  TempDir dir("raw");
  std::vector<double> data(2 * 2 * 8);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = 0.25 * double(i) - 3.0;
  const TrialSet raw(2, 2, 8, data, 100.0, {"A", "B"}, LabelVector::from_names({"x", "y"}));
  save_dataset(raw, dir.path() / "raw");
  const auto loaded = load_dataset(dir.path() / "raw");
  ASSERT_TRUE(std::holds_alternative<TrialSet>(loaded));
  const auto& r = std::get<TrialSet>(loaded);
  EXPECT_EQ(r.sample_rate(), 100.0);
  EXPECT_TRUE(std::equal(data.begin(), data.end(), r.data().begin()));
  EXPECT_EQ(r.series(1, 0)[3], data[(1 * 2 + 0) * 8 + 3]);
  EXPECT_EQ(r.labels().names(), (std::vector<std::string>{"x", "y"}));
  EXPECT_THROW(load_tfr(dir.path() / "raw"), DataError);
}

TEST(Dataset, CorruptFiles) {
  TempDir dir("bad");
  EXPECT_THROW(load_dataset(dir.path() / "missing"), IoError);
  const auto t = testutil::random_tensor({4, 1, 2, 2}, 4);
  save_dataset(t, dir.path() / "ds");
  std::filesystem::resize_file(dir.path() / "ds" / "data.bin", 8);
  EXPECT_THROW(load_dataset(dir.path() / "ds"), DataError);

  save_dataset(t, dir.path() / "ds2");
  {
    std::ofstream out(dir.path() / "ds2" / "meta.json", std::ios::trunc);
    out << "{ not json";
  }
  EXPECT_THROW(load_dataset(dir.path() / "ds2"), DataError);
}

TEST(Layout, FileRoundTripAndLookup) {
  TempDir dir("layout");
  SensorLayout l{{"Fz", "Cz"}, {{0.0, 1.0}, {0.0, 0.0}}};
  save_layout(l, dir.path() / "l.json");
  const auto back = load_layout(dir.path() / "l.json");
  EXPECT_EQ(back, l);
  ASSERT_TRUE(back.position_of("Cz"));
  EXPECT_EQ(back.position_of("Cz")->y, 0.0);
  EXPECT_FALSE(back.position_of("Pz"));
  SensorLayout dup{{"Fz", "Fz"}, {{0, 0}, {1, 1}}};
  EXPECT_THROW(dup.validate(), DataError);
  SensorLayout mismatch{{"Fz"}, {{0, 0}, {1, 1}}};
  EXPECT_THROW(mismatch.validate(), DataError);
}

TEST(CsvImport, HeaderAndValues) {
  TempDir dir("csv");
  const auto file = dir.path() / "toy.csv";
  {
    std::ofstream out(file);
    out << "label,t0,t1,t2\n"
        << "up,1,2,3\n"
        << "down,4,5,6\n"
        << "up,7,8,9\n";
  }
  const auto t = import_csv_tfr(file, 0.1);
  EXPECT_EQ(t.shape(), (TfrShape{3, 1, 1, 3}));
  EXPECT_EQ(t.at(1, 0, 0, 2), 6.0);
  EXPECT_DOUBLE_EQ(t.time_axis()[2], 0.2);
  EXPECT_EQ(t.labels()[1], 0);  // "down" < "up"

  const auto r = import_csv_raw(file, 50.0);
  EXPECT_EQ(r.samples(), 3u);
  EXPECT_EQ(r.series(2, 0)[0], 7.0);
}

TEST(CsvImport, Malformed) {
  TempDir dir("csvbad");
  const auto ragged = dir.path() / "ragged.csv";
  {
    std::ofstream out(ragged);
    out << "a,1,2\nb,3\n";
  }
  EXPECT_THROW(import_csv_tfr(ragged, 1.0), DataError);
  const auto text = dir.path() / "text.csv";
  {
    std::ofstream out(text);
    out << "a,1,2\nb,3,x\n";
  }
  EXPECT_THROW(import_csv_tfr(text, 1.0), DataError);
  EXPECT_THROW(import_csv_tfr(dir.path() / "none.csv", 1.0), IoError);
}
