#include "slnet/kernels.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace slnet;

TEST(BaseKernel, TcTwoLags)
{
    BaseKernelParams bp;
    bp.T = 2;
    bp.beta_ss = 0.5;
    const Matrix P = build_base_kernel(bp);
    Matrix expected(2, 2);
    expected << 0.5, 0.25, 0.25, 0.25;
    EXPECT_EQ(P, expected);
}

TEST(BaseKernel, ZeroPoleLeavesKernelUnfiltered)
{
    for (double omega : {0.0, 1.0, std::numbers::pi}) {
        BaseKernelParams bp;
        bp.T = 6;
        bp.beta_ss = 0.8;
        bp.omega = omega;
        bp.family = KernelFamily::SS2;
        EXPECT_EQ(build_base_kernel(bp), stable_spline_kernel(KernelFamily::SS2, 0.8, 6));
    }
}

TEST(BaseKernel, FilteredThreeLags)
{
    const Vector f = filter_impulse_response(0.5, std::numbers::pi / 2, 3);
    EXPECT_DOUBLE_EQ(f[0], 1.0);
    EXPECT_NEAR(f[1], 0.0, 1e-15);
    EXPECT_NEAR(f[2], -0.25, 1e-15);

    BaseKernelParams bp;
    bp.T = 3;
    bp.beta_ss = 0.7;
    bp.rho = 0.5;
    bp.omega = std::numbers::pi / 2;
    Matrix F(3, 3);
    F << 1, 0, 0, 0, 1, 0, -0.25, 0, 1;
    const Matrix P0 = oracle::tc_kernel(0.7, 3);
    Matrix expected = Matrix::Zero(3, 3);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c)
                for (int d = 0; d < 3; ++d)
                    expected(a, d) += F(a, b) * P0(b, c) * F(d, c);
    EXPECT_LT(oracle::rel_diff(build_base_kernel(bp), expected), 1e-14);
}

TEST(BaseKernel, Ss2Formula)
{
    const Matrix P = stable_spline_kernel(KernelFamily::SS2, 0.6, 4);
    const double b = 0.6;
    EXPECT_DOUBLE_EQ(P(1, 3), std::pow(b, 2 + 4 + 4) / 2 - std::pow(b, 12) / 6);
    EXPECT_TRUE(is_symmetric_psd(P));
}

TEST(BaseKernel, RejectsInvalidParameters)
{
    BaseKernelParams bp;
    bp.beta_ss = 1.0;
    EXPECT_THROW(build_base_kernel(bp), std::invalid_argument);
    bp.beta_ss = 0.5;
    bp.rho = 1.0;
    EXPECT_THROW(build_base_kernel(bp), std::invalid_argument);
    bp.rho = 0.0;
    bp.T = 0;
    EXPECT_THROW(build_base_kernel(bp), std::invalid_argument);
}

TEST(BaseKernel, DiagonalDecaysGeometrically)
{
    BaseKernelParams bp;
    bp.T = 60;
    bp.beta_ss = 0.85;
    bp.rho = 0.6;
    bp.omega = 0.7;
    const Matrix P = build_base_kernel(bp);
    EXPECT_TRUE(is_symmetric_psd(P));
    // log P_tt - t log(beta) stays bounded: the filter adds at most polynomial growth
    const Vector d = P.diagonal();
    for (int t = 40; t < 60; ++t)
        EXPECT_LT(d[t], d[t - 20]);
}

TEST(KernelS, KroneckerExamples)
{
    EXPECT_EQ(build_KS(Vector::Ones(4), Matrix::Identity(3, 3)), Matrix::Identity(12, 12));

    Vector g = Vector::Ones(4);
    g[0] = 0.0;
    const Matrix K = build_KS(g, Matrix::Identity(3, 3));
    EXPECT_EQ(K.topLeftCorner(3, 3), Matrix::Zero(3, 3));
    EXPECT_EQ(K.bottomRightCorner(9, 9), Matrix::Identity(9, 9));

    EXPECT_DOUBLE_EQ(build_KS(Vector::Constant(1, 2.0), Matrix::Constant(1, 1, 3.0))(0, 0), 6.0);
    EXPECT_THROW(build_KS(-Vector::Ones(1), Matrix::Identity(1, 1)), std::invalid_argument);
}

TEST(KernelS, MatchesKroneckerOracle)
{
    std::mt19937_64 rng(3);
    const Matrix P = oracle::random_spd(rng, 4);
    Vector g(9);
    g << 0.1, 0, 2, 3, 0.5, 0, 1, 1, 4;
    EXPECT_LT(oracle::rel_diff(build_KS(g, P), oracle::kron(Matrix(g.asDiagonal()), P)), 1e-15);
}

TEST(KernelL1, ScalarExample)
{
    const Matrix K = build_KL_type1(1.0, Matrix::Identity(1, 1), Matrix::Identity(1, 1));
    EXPECT_NEAR(K(0, 0), 0.5, 1e-15);
}

TEST(KernelL1, ZeroLambdaGivesZeroKernel)
{
    std::mt19937_64 rng(5);
    const Matrix P = oracle::random_spd(rng, 3);
    const LambdaStructure L(2, 0.0, Vector::Zero(1), oracle::random_orthonormal(rng, 2, 1));
    EXPECT_LT(build_KL_type1(0.7, L, P).norm(), 1e-12);
}

TEST(KernelL1, MatchesInverseFormForNonsingularLambda)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int p = 2, T = 3;
        const Matrix P = oracle::random_spd(rng, T);
        const Matrix Lambda = oracle::random_spd(rng, p);
        const double lambda = 0.3 + trial * 0.1;
        const Matrix direct =
            (lambda * oracle::kron(oracle::eye(p * p), P.inverse()) + oracle::kron(Lambda.inverse(), oracle::eye(p * T)))
                .inverse();
        EXPECT_LT(oracle::rel_diff(build_KL_type1(lambda, Lambda, P), direct), 1e-8);
    }
}

TEST(KernelL1, PsdForSingularLambda)
{
    std::mt19937_64 rng(13);
    const Matrix U = oracle::random_orthonormal(rng, 3, 1);
    const LambdaStructure L(3, 0.0, Vector::Constant(1, 2.0), U);
    BaseKernelParams bp;
    bp.T = 4;
    const Matrix K = build_KL_type1(0.5, L, build_base_kernel(bp));
    EXPECT_TRUE(is_symmetric_psd(K));
}

TEST(KernelL2, KroneckerExamples)
{
    EXPECT_EQ(build_KL_type2(Matrix::Identity(3, 3), Matrix::Identity(2, 2)), Matrix::Identity(18, 18));

    Matrix L = Matrix::Zero(2, 2);
    L(0, 0) = 1.0;
    const Matrix K = build_KL_type2(L, Matrix::Identity(4, 4));
    Matrix expected = Matrix::Zero(16, 16);
    expected.topLeftCorner(8, 8).setIdentity();
    EXPECT_EQ(K, expected);
}

TEST(KernelL2, EntrywiseCovariance)
{
    std::mt19937_64 rng(17);
    const int p = 2, T = 2;
    const Matrix Lambda = oracle::random_spd(rng, p, 0.0);
    const Matrix P = oracle::random_spd(rng, T);
    const Matrix K = build_KL_type2(Lambda, P);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            for (int k = 0; k < T; ++k)
                for (int ii = 0; ii < p; ++ii)
                    for (int jj = 0; jj < p; ++jj)
                        for (int kk = 0; kk < T; ++kk) {
                            const double expected = Lambda(i, ii) * (j == jj ? 1.0 : 0.0) * P(k, kk);
                            EXPECT_NEAR(K(ThetaVector::index(p, T, i, j, k), ThetaVector::index(p, T, ii, jj, kk)), expected,
                                        1e-14);
                        }
    EXPECT_LT(oracle::rel_diff(K, oracle::kron(oracle::kron(Lambda, oracle::eye(p)), P)), 1e-15);
}

TEST(KernelL2, RankIsProductOfRanks)
{
    std::mt19937_64 rng(19);
    const int p = 3, T = 4;
    const LambdaStructure L(p, 0.0, Vector::Constant(1, 1.5), oracle::random_orthonormal(rng, p, 1));
    const Matrix K = build_KL_type2(L, oracle::random_spd(rng, T));
    Eigen::JacobiSVD<Matrix> svd(K);
    const Vector s = svd.singularValues();
    int rank = 0;
    for (Index i = 0; i < s.size(); ++i)
        rank += s[i] > 1e-10 * s[0];
    EXPECT_EQ(rank, 1 * p * T);
}

TEST(KernelL2, ChannelPermutationConsistency)
{
    std::mt19937_64 rng(23);
    const int p = 3, T = 2;
    const Matrix Lambda = oracle::random_spd(rng, p);
    const Matrix P = oracle::random_spd(rng, T);
    const int perm[3] = {2, 0, 1};
    Matrix Pi = Matrix::Zero(p, p);
    for (int i = 0; i < p; ++i)
        Pi(i, perm[i]) = 1.0;
    const Matrix K = build_KL_type2(Lambda, P);
    const Matrix Kperm = build_KL_type2(Pi * Lambda * Pi.transpose(), P);
    // permuted kernel at (r, c, k; s, d, kk) is the original at (perm r, perm c, k; perm s, perm d, kk)
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c)
            for (int s = 0; s < p; ++s)
                for (int d = 0; d < p; ++d)
                    for (int k = 0; k < T; ++k)
                        for (int kk = 0; kk < T; ++kk)
                            EXPECT_NEAR(Kperm(ThetaVector::index(p, T, r, c, k), ThetaVector::index(p, T, s, d, kk)),
                                        K(ThetaVector::index(p, T, perm[r], perm[c], k),
                                          ThetaVector::index(p, T, perm[s], perm[d], kk)),
                                        1e-14);
}

TEST(LambdaStructureTest, AssemblyAndValidation)
{
    std::mt19937_64 rng(29);
    const Matrix U = oracle::random_orthonormal(rng, 4, 2);
    Vector beta(2);
    beta << 3.0, 0.5;
    const LambdaStructure L(4, 0.2, beta, U);
    const Matrix A = L.assemble();
    EXPECT_LT((A * U - U * Matrix(beta.asDiagonal())).norm(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(A);
    EXPECT_NEAR(es.eigenvalues().minCoeff(), 0.2, 1e-12);

    EXPECT_THROW(LambdaStructure(4, 0.2, beta, 2.0 * U).assemble(), std::invalid_argument);
    EXPECT_THROW(LambdaStructure(4, -0.1, beta, U).assemble(), std::invalid_argument);
    EXPECT_THROW(LambdaStructure(4, 0.1, -beta, U).assemble(), std::invalid_argument);
}

TEST(PsdCheck, DetectsIndefiniteAndAsymmetric)
{
    Matrix A(2, 2);
    A << 1, 0, 0, -1;
    EXPECT_FALSE(is_symmetric_psd(A));
    A << 1, 0.5, 0.4, 1;
    EXPECT_FALSE(is_symmetric_psd(A));
    A << 1, 0.5, 0.5, 1;
    EXPECT_TRUE(is_symmetric_psd(A));
}
