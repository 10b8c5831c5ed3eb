// SPDX-License-Identifier: Apache-2.0
#include "wfm/checkpoint.hpp"
#include "wfm/cmatrix.hpp"
#include "wfm/composite_check.hpp"
#include "wfm/gradcheck.hpp"
#include "wfm/rng.hpp"
#include "wfm/tensor.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace wfm;
using TD = Tensor<double>;

TEST_SUITE("tensor")
{
    TEST_CASE("matmul with identity returns the operand")
    {
        const TD I({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
        const TD A({3, 2}, {1, 2, 3, 4, 5, 6});
        const auto out = matmul(I, A);
        CHECK(out.shape() == Shape{3, 2});
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(out.at(i) == A.at(i));
    }

    TEST_CASE("softmax of equal logits is uniform and gelu(0) is 0")
    {
        const auto s = softmax(TD({1, 3}, {0, 0, 0}));
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(s.at(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        CHECK(gelu(TD({1}, {0.0})).at(0) == 0.0);
    }

    TEST_CASE("backward of sum gives ones; x*x at 3 gives 6")
    {
        const TD x({4}, {1, -2, 3, 0.5}, true);
        sum(x).backward();
        for (double g : x.grad())
            CHECK(g == 1.0);

        const TD y({1}, {3.0}, true);
        sum(mul(y, y)).backward();
        CHECK(y.grad()[0] == 6.0);
    }

    TEST_CASE("repeated backward accumulates into leaves")
    {
        const TD x({2}, {1, 2}, true);
        const auto l = sum(scale(x, 2.0));
        l.backward();
        l.backward();
        CHECK(x.grad()[0] == 4.0);
        CHECK(x.grad()[1] == 4.0);
    }

    TEST_CASE("a tensor feeding two consumers receives the sum of both paths")
    {
        const TD x({3}, {0.5, -1.0, 2.0}, true);
        const auto l = add(sum(square(x)), sum(scale(x, 3.0)));
        l.backward();
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(x.grad()[i] == doctest::Approx(2.0 * x.at(i) + 3.0));
    }

    TEST_CASE("non-scalar backward is rejected")
    {
        const TD x({2}, {1, 2}, true);
        CHECK_THROWS_AS(scale(x, 2.0).backward(), ShapeError);
    }

    TEST_CASE("shape mismatch names the op and both shapes")
    {
        const TD a({2, 3}, std::vector<double>(6, 1.0));
        const TD b({2, 2}, std::vector<double>(4, 1.0));
        try {
            (void)matmul(a, b);
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("matmul") != std::string::npos);
            CHECK(msg.find(shape_str(a.shape())) != std::string::npos);
            CHECK(msg.find(shape_str(b.shape())) != std::string::npos);
        }
    }

    TEST_CASE("non-finite leaf values are rejected")
    {
        CHECK_THROWS_AS(TD({2}, {1.0, std::numeric_limits<double>::quiet_NaN()}), NonFiniteError);
        CHECK_THROWS_AS(TD({1}, {std::numeric_limits<double>::infinity()}), NonFiniteError);
    }

    TEST_CASE("element count matches shape")
    {
        CHECK_THROWS(TD({2, 3}, std::vector<double>(5, 0.0)));
        const auto z = TD::zeros({4, 5});
        CHECK(z.numel() == 20);
    }

    TEST_CASE("every op kind passes the finite-difference check over 10 seeds")
    {
        for (auto k : all_op_kinds())
            for (std::uint64_t seed = 1; seed <= 10; ++seed) {
                const auto r = grad_check(k, seed);
                INFO(op_kind_name(k) << " seed " << seed);
                CHECK(r.max_rel_error < 1e-5);
                CHECK(r.elements > 0);
            }
    }

    TEST_CASE("matmul, layer_norm and softmax cross-entropy at seed 7")
    {
        CHECK(grad_check(OpKind::MatMul, 7).max_rel_error < 1e-5);
        CHECK(grad_check(OpKind::LayerNorm, 7).max_rel_error < 1e-5);
        CHECK(grad_check_composite(CompositeKind::SoftmaxCrossEntropy, 7).max_rel_error < 1e-5);
    }

    TEST_CASE("composite graphs pass the finite-difference check")
    {
        for (auto k : all_composite_kinds())
            for (std::uint64_t seed = 1; seed <= 10; ++seed) {
                const auto r = grad_check_composite(k, seed);
                INFO(composite_kind_name(k) << " seed " << seed);
                CHECK(r.max_rel_error < 1e-5);
                CHECK(r.zero_grad_max < 1e-12);
            }
    }

    TEST_CASE("op names round-trip")
    {
        for (auto k : all_op_kinds())
            CHECK(op_kind_from_name(op_kind_name(k)) == k);
        CHECK_THROWS(op_kind_from_name("nope"));
    }

    TEST_CASE("checkpoint round trip and header validation")
    {
        const auto path = std::filesystem::temp_directory_path() / "wfm_unit_ckpt.wfmc";
        std::vector<CheckpointRecord> recs{{"a/b", {2, 3}, {1, 2, 3, 4, 5, 6}}, {"c", {1}, {-0.5f}}};
        write_checkpoint(path, recs);
        const auto back = read_checkpoint(path);
        REQUIRE(back.size() == 2);
        CHECK(back[0].name == "a/b");
        CHECK(back[0].shape == Shape{2, 3});
        CHECK(back[0].values == recs[0].values);
        CHECK(find_record(back, "c").values[0] == -0.5f);
        {
            std::ifstream in(path, std::ios::binary);
            char magic[4];
            in.read(magic, 4);
            CHECK(std::string(magic, 4) == "WFMC");
        }
        {
            std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
            f.write("XXXX", 4);
        }
        CHECK_THROWS_AS(read_checkpoint(path), CheckpointError);
        std::filesystem::remove(path);
    }
}

TEST_SUITE("cmatrix")
{
    TEST_CASE("svd of diag(3,1) and inverse of identity")
    {
        ComplexMatrix d(2, 2);
        d(0, 0) = 1.0;
        d(1, 1) = 3.0;
        const auto s = svd(d);
        CHECK(s.S[0] == doctest::Approx(3.0));
        CHECK(s.S[1] == doctest::Approx(1.0));
        const auto inv = inverse(ComplexMatrix::identity(2));
        CHECK(frobenius_norm(inv - ComplexMatrix::identity(2)) == 0.0);
    }

    TEST_CASE("dft matrix rows and orthogonality")
    {
        for (std::size_t n : {1, 2, 4, 7, 16}) {
            const auto F = dft_matrix(n);
            for (std::size_t m = 0; m < n; ++m)
                CHECK(std::abs(F(0, m) - cd(1.0, 0.0)) < 1e-15);
            const auto G = cmatmul(hermitian(F), F);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    CHECK(std::abs(G(i, j) - (i == j ? cd(double(n)) : cd(0.0))) < 1e-10);
        }
        const auto F = dft_matrix(8);
        CHECK(std::abs(F(3, 5) - std::polar(1.0, -2.0 * M_PI * 15.0 / 8.0)) < 1e-12);
    }

    TEST_CASE("svd reconstructs and orders singular values")
    {
        Rng rng(3);
        for (auto [r, c] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 2}, {4, 4}, {8, 3}, {3, 8}, {8, 8}}) {
            ComplexMatrix A(r, c);
            for (auto& v : A.data())
                v = {rng.normal(), rng.normal()};
            const auto s = svd(A);
            ComplexMatrix S(s.S.size(), s.S.size());
            for (std::size_t i = 0; i < s.S.size(); ++i) {
                S(i, i) = s.S[i];
                CHECK(s.S[i] >= 0.0);
                if (i)
                    CHECK(s.S[i] <= s.S[i - 1]);
            }
            const auto back = cmatmul(cmatmul(s.U, S), hermitian(s.V));
            CHECK(frobenius_norm(back - A) <= 1e-10 * frobenius_norm(A));
        }
    }

    TEST_CASE("hermitian is an involution")
    {
        Rng rng(4);
        ComplexMatrix A(3, 5);
        for (auto& v : A.data())
            v = {rng.normal(), rng.normal()};
        CHECK(frobenius_norm(hermitian(hermitian(A)) - A) == 0.0);
    }

    TEST_CASE("singular inverse reports a condition estimate")
    {
        ComplexMatrix A(2, 2);
        A(0, 0) = 1.0;
        A(0, 1) = 2.0;
        A(1, 0) = 2.0;
        A(1, 1) = 4.0;
        try {
            (void)inverse(A);
            FAIL("expected SingularMatrixError");
        } catch (const SingularMatrixError& e) {
            CHECK(e.condition_estimate() > kDefaultConditionCeiling);
        }
    }

    TEST_CASE("inverse times matrix is identity")
    {
        Rng rng(5);
        ComplexMatrix A(4, 4);
        for (auto& v : A.data())
            v = {rng.normal(), rng.normal()};
        CHECK(frobenius_norm(cmatmul(A, inverse(A)) - ComplexMatrix::identity(4)) < 1e-12);
    }
}
