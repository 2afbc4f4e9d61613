import pytest

from gsvgd.config import (
    ConfigError,
    ExperimentConfig,
    parse_config,
    render_config,
    validate_config,
    with_overrides,
)

MINIMAL = """
method = gsvgd
target = gaussian
d = 50
n_particles = 500
iterations = 2000
m = 1
seed = 0
"""


class TestParsing:
    def test_minimal_config_defaults(self):
        config = parse_config(MINIMAL)
        assert config.method == "gsvgd"
        assert config.resolved_projector_count() == 20  # min(20, 50 // 1)
        assert config.step_size == 0.1
        assert config.sampler_config().anneal.threshold == pytest.approx(1e-4 * 20)

    def test_projector_cap_at_20(self):
        config = parse_config(MINIMAL.replace("d = 50", "d = 100"))
        assert config.resolved_projector_count() == 20

    def test_floor_rule_below_cap(self):
        config = parse_config(MINIMAL.replace("m = 1", "m = 7"))
        assert config.resolved_projector_count() == 50 // 7

    def test_comments_and_blank_lines(self):
        text = MINIMAL + "\n# a comment\n\nstep_size = 0.25  # trailing\n"
        assert parse_config(text).step_size == 0.25

    def test_n_alias(self):
        text = MINIMAL.replace("n_particles = 500", "n = 123")
        assert parse_config(text).n_particles == 123

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="'foo'"):
            parse_config(MINIMAL + "foo = 1\n")

    def test_missing_required_named(self):
        text = "\n".join(l for l in MINIMAL.splitlines() if not l.startswith("seed"))
        with pytest.raises(ConfigError, match="'seed'"):
            parse_config(text)

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="more than once"):
            parse_config(MINIMAL + "d = 10\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config(MINIMAL + "just words\n")

    def test_bad_number_named(self):
        with pytest.raises(ConfigError, match="'d'"):
            parse_config(MINIMAL.replace("d = 50", "d = fifty"))

    def test_bool_parsing(self):
        text = MINIMAL.replace("method = gsvgd", "method = svgd") + "adagrad = true\n"
        assert parse_config(text).adagrad is True
        with pytest.raises(ConfigError, match="'adagrad'"):
            parse_config(MINIMAL + "adagrad = maybe\n")

    def test_nested_keys(self):
        text = MINIMAL + "anneal.t0 = 1e-3\nkernel.family = imq\n"
        config = parse_config(text)
        assert config.anneal_t0 == pytest.approx(1e-3)
        assert config.kernel_family == "imq"


class TestValidation:
    def test_zero_m_named(self):
        with pytest.raises(ConfigError, match="'m'"):
            parse_config(MINIMAL.replace("m = 1", "m = 0"))

    def test_method_enum(self):
        with pytest.raises(ConfigError, match="'method'"):
            parse_config(MINIMAL.replace("method = gsvgd", "method = hmc"))

    def test_target_enum(self):
        with pytest.raises(ConfigError, match="'target'"):
            parse_config(MINIMAL.replace("target = gaussian", "target = banana"))

    def test_projector_overflow(self):
        with pytest.raises(ConfigError, match="'n_projectors'"):
            parse_config(MINIMAL + "n_projectors = 51\n")

    def test_diffusion_dimension_pinned(self):
        text = MINIMAL.replace("target = gaussian", "target = diffusion")
        with pytest.raises(ConfigError, match="'d'"):
            parse_config(text)
        ok = text.replace("d = 50", "d = 100")
        assert parse_config(ok).target == "diffusion"

    def test_diffusion_rejects_init_overrides(self):
        text = MINIMAL.replace("target = gaussian", "target = diffusion").replace(
            "d = 50", "d = 100"
        )
        with pytest.raises(ConfigError, match="init"):
            parse_config(text + "init.mean = 0.0\n")

    def test_adagrad_needs_svgd(self):
        with pytest.raises(ConfigError, match="'adagrad'"):
            parse_config(MINIMAL + "adagrad = true\n")

    def test_correlation_range(self):
        text = MINIMAL.replace("target = gaussian", "target = xshaped")
        with pytest.raises(ConfigError, match="'target.correlation'"):
            parse_config(text + "target.correlation = 1.0\n")

    def test_kernel_family_enum(self):
        with pytest.raises(ConfigError, match="'kernel.family'"):
            parse_config(MINIMAL + "kernel.family = matern\n")

    def test_negative_step(self):
        with pytest.raises(ConfigError, match="'step_size'"):
            parse_config(MINIMAL + "step_size = -0.1\n")


class TestRenderRoundTrip:
    def test_minimal_round_trips(self):
        config = parse_config(MINIMAL)
        assert parse_config(render_config(config)) == config

    def test_non_default_round_trips(self):
        text = (
            MINIMAL
            + "n_projectors = 10\nstep_size = 0.25\nprojector_step = 0.01\n"
            + "anneal.t0 = 1e-3\nanneal.threshold = 0.005\nkernel.family = imq\n"
            + "kernel.bandwidth = 2.0\nrepetitions = 3\nmetric_stride = 7\n"
            + "out_dir = /tmp/somewhere\ninit.mean = 1.5\ninit.var = 0.5\nfigures = false\n"
        )
        config = parse_config(text)
        assert parse_config(render_config(config)) == config

    def test_diffusion_round_trips(self):
        text = (
            MINIMAL.replace("target = gaussian", "target = diffusion").replace(
                "d = 50", "d = 100"
            )
            + "target.sigma_obs = 0.2\ntarget.observation_seed = 5\n"
        )
        config = parse_config(text)
        assert parse_config(render_config(config)) == config


class TestOverridesAndFactories:
    def test_with_overrides(self):
        config = parse_config(MINIMAL)
        out = with_overrides(config, seed=7, out_dir="/tmp/x")
        assert out.seed == 7 and out.out_dir == "/tmp/x"
        assert with_overrides(config) == config

    def test_target_factories(self):
        for target, d in (("gaussian", 4), ("multimodal", 4), ("xshaped", 4), ("diffusion", 100)):
            text = MINIMAL.replace("target = gaussian", f"target = {target}").replace(
                "d = 50", f"d = {d}"
            )
            config = parse_config(text)
            model = config.build_target()
            assert model.dim == d

    def test_init_fn_defaults(self):
        import numpy as np

        config = parse_config(MINIMAL)
        model = config.build_target()
        init = config.init_fn(model)
        draws = init(np.random.default_rng(0), 4000)
        assert abs(draws.mean() - 2.0) < 0.05
        assert abs(draws.var() - 2.0) < 0.1

    def test_validate_config_direct(self):
        config = ExperimentConfig(
            method="gsvgd", target="gaussian", d=10, n_particles=50,
            iterations=10, seed=0, m=11,
        )
        with pytest.raises(ConfigError, match="'m'"):
            validate_config(config)
