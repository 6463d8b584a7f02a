#include <gtest/gtest.h>

#include "oracles.hpp"
#include "toy_configs.hpp"
#include "uwofdm/txchain.hpp"

using namespace uwofdm;

namespace {

struct Paper {
    OfdmSystemConfig cfg = paper_config();
    SubcarrierMap map = build_subcarrier_map(cfg);
    RedundancyGenerator gen = derive_generator(map, cfg);
    DftPlan plan{64};
};

} // namespace

TEST(UniqueWord, EnergyRatio) {
    Paper p;
    const UniqueWord uw = build_unique_word(16, 4.0 / 52.0, p.gen);
    EXPECT_NEAR(uw.energy / mean_total_symbol_energy(p.gen, uw), 4.0 / 52.0, 1e-12);
    EXPECT_NEAR(uw.energy, uw.time.squaredNorm(), 1e-14);
    cvec padded = cvec::Zero(64);
    padded.tail(16) = uw.time;
    EXPECT_LE(max_abs(uw.freq - oracle::direct_dft(padded)), 1e-10);
}

TEST(UniqueWord, ZeroKindAndZeroRatio) {
    Paper p;
    EXPECT_EQ(build_unique_word(16, 4.0 / 52.0, p.gen, UwKind::zero).energy, 0.0);
    EXPECT_EQ(build_unique_word(16, 0.0, p.gen).energy, 0.0);
    EXPECT_THROW(build_unique_word(16, 1.0, p.gen), invalid_argument_error);
    EXPECT_THROW(build_unique_word(64, 0.1, p.gen), invalid_argument_error);
}

TEST(EncodeSymbol, TailCarriesUniqueWord) {
    Paper p;
    const UniqueWord uw = build_unique_word(16, 4.0 / 52.0, p.gen);
    RngStream rng(21);
    for (int i = 0; i < 100; ++i) {
        const TxSymbol tx = encode_symbol(oracle::random_qpsk(rng, 36), p.gen, p.map, uw, p.plan);
        EXPECT_LE(max_abs(tx.time.tail(16) - uw.time), 1e-9);
        EXPECT_LE(max_abs(tx.time - encode_symbol_frequency_form(tx.data, p.gen, p.map, uw, p.plan)), 1e-12);
        EXPECT_LE(max_abs(p.map.extract_data(tx.active) - tx.data), 0.0);
    }
}

TEST(EncodeSymbol, MeanEnergyMatchesPrediction) {
    Paper p;
    const UniqueWord uw = build_unique_word(16, 4.0 / 52.0, p.gen);
    RngStream rng(22);
    double sum = 0.0;
    const int count = 20000;
    for (int i = 0; i < count; ++i) {
        sum += encode_symbol(oracle::random_qpsk(rng, 36), p.gen, p.map, uw, p.plan).time.squaredNorm();
    }
    EXPECT_NEAR(sum / count, mean_total_symbol_energy(p.gen, uw), 0.01 * mean_total_symbol_energy(p.gen, uw));
}

TEST(EncodeSymbol, ToyConfigZeroTail) {
    const auto c = toy::n16();
    const auto map = build_subcarrier_map(c);
    const auto gen = derive_generator(map, c);
    const UniqueWord uw = build_unique_word(4, 0.0, gen);
    RngStream rng(23);
    const TxSymbol tx = encode_symbol(oracle::random_qpsk(rng, 8), gen, map, uw, DftPlan(16));
    EXPECT_LE(tx.time.tail(4).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EncodeSymbol, RejectsMismatchedInputs) {
    Paper p;
    const UniqueWord uw = build_unique_word(16, 0.1, p.gen);
    EXPECT_THROW(encode_symbol(cvec::Zero(35), p.gen, p.map, uw, p.plan), invalid_argument_error);
    EXPECT_THROW(encode_symbol(cvec::Zero(36), p.gen, p.map, uw, DftPlan(32)), invalid_argument_error);
}
