// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "hennion/selftest.hpp"

using namespace hennion;

TEST(Mutation, PairingIdentityAcceptsPredual) {
  EXPECT_TRUE(suite::check_pairing_identity([](const SuperOperator& S) { return predual(S); }).pass);
}

TEST(Mutation, SignFlippedPredualFailsPairingIdentity) {
  auto flipped = [](const SuperOperator& S) { return scaled(predual(S), -1.0); };
  CheckResult r = suite::check_pairing_identity(flipped);
  EXPECT_FALSE(r.pass) << r.detail;
}

TEST(Mutation, PlainMatrixWithoutTransposeFailsPairingIdentity) {
  auto untransposed = [](const SuperOperator& S) { return from_matrix(S.algebra(), S.matrix(), "", 0); };
  EXPECT_FALSE(suite::check_pairing_identity(untransposed).pass);
}
