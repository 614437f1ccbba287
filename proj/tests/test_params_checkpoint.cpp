#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "lrva/checkpoint.hpp"
#include "lrva/ops.hpp"
#include "lrva/params.hpp"

using namespace lrva;

TEST(ParameterStore, RegistrationContract) {
  ParameterStore store;
  Rng rng(5);
  store.add("backbone.kernel", Tensor::randn({4, 3, 2, 2}, rng), /*frozen=*/true);
  store.add("adapter.w", Tensor::zeros({9}), /*frozen=*/false);
  store.add("adapter.alpha", Tensor::zeros({1}), /*frozen=*/false);

  EXPECT_THROW(store.add("adapter.w", Tensor::zeros({9}), false), std::invalid_argument);
  EXPECT_THROW(store.get("missing"), std::out_of_range);

  EXPECT_TRUE(store.is_frozen("backbone.kernel"));
  EXPECT_FALSE(store.get("backbone.kernel").requires_grad());
  EXPECT_TRUE(store.get("adapter.w").requires_grad());

  EXPECT_EQ(store.trainable_count(), 10);
  EXPECT_EQ(store.frozen_count(), 48);
  EXPECT_EQ(store.trainable_count_with_prefix("adapter."), 10);
  EXPECT_EQ(store.trainable_count_with_prefix("backbone."), 0);
  EXPECT_EQ(store.trainable().size(), 2u);
}

TEST(ParameterStore, ZeroGradsClearsTrainableOnly) {
  ParameterStore store;
  Tensor w = store.add("w", Tensor::full({2}, 1.0), false);
  {
    Tape tape;
    Tensor l = sum(mul(w, w));
    tape.backward(l);
  }
  EXPECT_DOUBLE_EQ(w.grad()[0], 2.0);
  store.zero_grads();
  EXPECT_DOUBLE_EQ(w.grad()[0], 0.0);
}

TEST(ParameterStore, FrozenValuesSnapshotTracksOnlyFrozen) {
  ParameterStore store;
  store.add("frozen_a", Tensor::full({2}, 3.0), true);
  store.add("train_b", Tensor::full({2}, 4.0), false);
  const auto snap = store.frozen_values();
  ASSERT_EQ(snap.size(), 2u);
  EXPECT_DOUBLE_EQ(snap[0], 3.0);

  store.get("train_b").vec()[0] = 99.0;  // trainable update must not show up
  EXPECT_EQ(store.frozen_values(), snap);
}

namespace {

ParameterStore make_store(double scale) {
  ParameterStore store;
  Rng rng(7);
  store.add("backbone.k", scalar_mul(Tensor::randn({2, 3}, rng), scale), true);
  store.add("adapter.w", scalar_mul(Tensor::randn({4}, rng), scale), false);
  return store;
}

}  // namespace

TEST(Checkpoint, EncodeDecodeRoundTrip) {
  ParameterStore store = make_store(1.0);
  const Checkpoint ckpt = snapshot(store);
  const auto bytes = encode_checkpoint(ckpt);
  const Checkpoint back = decode_checkpoint(bytes);

  ASSERT_EQ(back.tensors.size(), 2u);
  EXPECT_EQ(back.tensors[0].name, "backbone.k");
  EXPECT_TRUE(back.tensors[0].frozen);
  EXPECT_EQ(back.tensors[0].dims, (Shape{2, 3}));
  EXPECT_EQ(back.tensors[1].name, "adapter.w");
  EXPECT_FALSE(back.tensors[1].frozen);
  for (std::size_t i = 0; i < ckpt.tensors[0].values.size(); ++i) {
    EXPECT_EQ(back.tensors[0].values[i], ckpt.tensors[0].values[i]);
  }
}

TEST(Checkpoint, EncodingIsByteDeterministic) {
  ParameterStore store = make_store(1.0);
  EXPECT_EQ(encode_checkpoint(snapshot(store)), encode_checkpoint(snapshot(store)));
}

TEST(Checkpoint, LoadRestoresValues) {
  ParameterStore src = make_store(1.0);
  ParameterStore dst = make_store(2.0);
  load_checkpoint(dst, snapshot(src));
  for (std::size_t i = 0; i < src.entries().size(); ++i) {
    const auto& a = src.entries()[i].tensor.vec();
    const auto& b = dst.entries()[i].tensor.vec();
    for (std::size_t j = 0; j < a.size(); ++j) {
      // payload is f32 on disk; equality holds after one f32 round-trip
      EXPECT_EQ(static_cast<float>(a[j]), static_cast<float>(b[j]));
      EXPECT_EQ(static_cast<double>(static_cast<float>(a[j])), b[j]);
    }
  }
}

TEST(Checkpoint, RejectsMalformedPayloads) {
  ParameterStore store = make_store(1.0);
  auto bytes = encode_checkpoint(snapshot(store));

  auto corrupt_magic = bytes;
  corrupt_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(corrupt_magic), std::runtime_error);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(decode_checkpoint(truncated), std::runtime_error);

  auto bad_version = bytes;
  bad_version[4] = 0x7f;
  EXPECT_THROW(decode_checkpoint(bad_version), std::runtime_error);

  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), std::runtime_error);
}

TEST(Checkpoint, LoadRejectsMismatchedStore) {
  ParameterStore src = make_store(1.0);
  const Checkpoint ckpt = snapshot(src);

  ParameterStore missing;
  missing.add("backbone.k", Tensor::zeros({2, 3}), true);
  EXPECT_THROW(load_checkpoint(missing, ckpt), std::runtime_error);

  ParameterStore wrong_shape;
  wrong_shape.add("backbone.k", Tensor::zeros({3, 2}), true);
  wrong_shape.add("adapter.w", Tensor::zeros({4}), false);
  EXPECT_THROW(load_checkpoint(wrong_shape, ckpt), std::runtime_error);

  ParameterStore wrong_flag;
  wrong_flag.add("backbone.k", Tensor::zeros({2, 3}), false);
  wrong_flag.add("adapter.w", Tensor::zeros({4}), false);
  EXPECT_THROW(load_checkpoint(wrong_flag, ckpt), std::runtime_error);
}

TEST(Checkpoint, FileRoundTrip) {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "lrva_ckpt_test.lrva";
  ParameterStore store = make_store(1.0);
  write_checkpoint_file(snapshot(store), path);
  const Checkpoint back = read_checkpoint_file(path);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(snapshot(store)));
  fs::remove(path);
  EXPECT_THROW(read_checkpoint_file(path), std::runtime_error);
}
