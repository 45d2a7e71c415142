"""Campaign bidding under a budget and a pessimistic return-on-investment floor.

Every campaign is a batch of ads. One GP predicts each ad's market bid price
from its features, another its click value. A campaign's bids stay close to
the predicted prices, pay for predicted clicks, and may not push the
pessimistic clicks-per-spend ratio below the campaign's threshold.
Feedback arrives only for ads that received a positive bid.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, TextIO

import numpy as np

from ..arteo_core import model_gain, split_seed
from ..confidence import ConfidenceParams, beta
from ..kernel_gp import KernelSpec, Observation, gp_condition
from ..nlp_solver import DecisionProblem, SolverSettings, SolveStatus, minimize

__all__ = [
    "Ad",
    "Campaign",
    "BidConfig",
    "BidState",
    "CampaignResult",
    "BUDGET_PER_AD",
    "CampaignFormatError",
    "generate_campaigns",
    "generate_bid_data",
    "write_campaign_csv",
    "ingest_campaign_csv",
    "bid_objective",
    "roi_constraint",
    "budget_constraint",
    "click_threshold",
    "init_bid_state",
    "bid_campaign_step",
    "run_bid_campaigns",
    "write_results_csv",
    "RESULTS_HEADER",
]

log = logging.getLogger(__name__)

BUDGET_PER_AD = 180.0
RESULTS_HEADER = ["campaign_id", "spend", "budget", "realized_roi", "threshold", "n_positive_bids", "z"]


class CampaignFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Ad:
    id: str
    features: tuple
    true_bid_price: float
    true_click: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.features)):
            raise ValueError(f"ad {self.id}: non-finite features")
        if self.true_bid_price < 0:
            raise ValueError(f"ad {self.id}: negative bid price")
        if self.true_click not in (0, 1):
            raise ValueError(f"ad {self.id}: click must be 0 or 1")


@dataclass(frozen=True)
class Campaign:
    index: str
    ads: tuple
    roi_threshold: float

    def __post_init__(self):
        if not self.ads:
            raise ValueError("a campaign needs at least one ad")
        if not self.roi_threshold > 0:
            raise ValueError(f"campaign {self.index}: threshold must be positive")

    @property
    def m(self) -> int:
        return len(self.ads)

    @property
    def budget(self) -> float:
        return BUDGET_PER_AD * self.m

    @property
    def features(self) -> np.ndarray:
        return np.array([a.features for a in self.ads], dtype=float)

    @property
    def benchmark_bids(self) -> np.ndarray:
        return np.array([a.true_bid_price for a in self.ads])

    @property
    def clicks(self) -> np.ndarray:
        return np.array([a.true_click for a in self.ads], dtype=float)

    @property
    def benchmark_roi(self) -> float:
        return float(self.clicks.sum() / self.benchmark_bids.sum())


@dataclass
class BidConfig:
    """Model and campaign settings.

    ``click_input`` is ``"features"`` (click value depends on the ad only) or
    ``"features+bid"`` (the bid, divided by ``bid_scale``, is appended to the
    click model's input so the click uncertainty varies with the bid).
    """

    click_cost: float = 1.0
    zeta: float = 100.0
    price_kernel: KernelSpec = field(default_factory=lambda: KernelSpec("matern32", 1.0, 150.0**2))
    click_kernel: KernelSpec = field(default_factory=lambda: KernelSpec("se", 0.5, 0.25))
    seed_size: int = 30
    roi_fraction: float = 0.9
    price_dims: int = 16
    click_dims: int = 8
    price_noise_std: float = 1.0
    click_noise_std: float = 0.05
    click_rate: float = 0.3
    click_cutoff: float = 0.5
    beta_override: float | None = 2.0
    rkhs_bound: float | None = None
    failure_prob: float = 0.05
    click_input: str = "features"
    bid_scale: float = BUDGET_PER_AD
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.click_input not in ("features", "features+bid"):
            raise ValueError(f"click_input must be 'features' or 'features+bid', got {self.click_input!r}")
        if not 0 < self.click_dims <= self.price_dims:
            raise ValueError("need 0 < click_dims <= price_dims")
        if not 0 < self.roi_fraction:
            raise ValueError("roi_fraction must be positive")
        if not 0.05 <= self.click_rate <= 0.5:
            raise ValueError("click_rate must lie in [0.05, 0.5]")


# -- synthetic data ---------------------------------------------------------


def _price_truth(u):
    return 120.0 + 45.0 * u[:, 0] + 25.0 * np.sin(2.0 * u[:, 1])


def _click_score(u):
    return np.sin(1.5 * u[:, 0]) + u[:, 1] - 0.5 * u[:, 0] * u[:, 1]


def _draw_ads(rng, n, config: BidConfig, mix: np.ndarray, cut: float | None, prefix: str):
    u = rng.uniform(-1.0, 1.0, size=(n, 2))
    feats = u @ mix + 0.02 * rng.standard_normal((n, config.price_dims))
    price = np.maximum(_price_truth(u) + 5.0 * rng.standard_normal(n), 1.0)
    score = _click_score(u) + 0.05 * rng.standard_normal(n)
    if cut is None:
        cut = float(np.quantile(score, 1.0 - config.click_rate))
    clicks = (score >= cut).astype(int)
    ads = [
        Ad(f"{prefix}{i}", tuple(float(v) for v in f), float(p), int(c))
        for i, (f, p, c) in enumerate(zip(feats, price, clicks))
    ]
    return ads, cut


def _mixing(rng, config: BidConfig) -> np.ndarray:
    """Unit-norm rows map the 2-D latent onto both feature blocks."""
    mix = rng.standard_normal((2, config.price_dims))
    mix[:, : config.click_dims] /= np.linalg.norm(mix[:, : config.click_dims], axis=1, keepdims=True)
    mix[:, config.click_dims :] /= max(np.linalg.norm(mix[:, config.click_dims :]), 1.0)
    return mix


def generate_bid_data(seed: int, m: int, count: int, config: BidConfig | None = None):
    """Synthetic campaigns plus a historical ad pool for the initial feedback.

    Ads live on a two-dimensional latent space embedded in the feature space,
    so the click features (the first ``click_dims`` columns) and the price
    features carry the same information. Prices and click scores are smooth
    functions of the latent point plus noise; clicks threshold the score at
    the quantile giving ``click_rate`` over the campaign ads.

    Returns
    -------
    campaigns : list of Campaign
    seed_ads : list of Ad
        ``config.seed_size`` ads drawn after the campaigns, so the campaigns
        do not depend on the seed size.
    """
    if m < 1 or count < 1:
        raise ValueError("m and count must be >= 1")
    config = config or BidConfig()
    rng = split_seed(seed)["generator"]
    mix = _mixing(rng, config)
    ads, cut = _draw_ads(rng, m * count, config, mix, None, "ad")
    seed_ads, _ = _draw_ads(rng, config.seed_size, config, mix, cut, "seed")
    campaigns = []
    for k in range(count):
        chunk = tuple(ads[k * m : (k + 1) * m])
        campaigns.append(Campaign(str(k), chunk, _threshold(chunk, config.roi_fraction)))
    return campaigns, seed_ads


def _threshold(ads, fraction: float) -> float:
    clicks = sum(a.true_click for a in ads)
    spend = sum(a.true_bid_price for a in ads)
    if spend <= 0:
        raise ValueError("total bid price must be positive")
    # a click-free campaign still gets a positive floor
    return fraction * max(clicks, 0.5) / spend


def generate_campaigns(seed: int, m: int, count: int, config: BidConfig | None = None) -> list:
    return generate_bid_data(seed, m, count, config)[0]


def write_campaign_csv(campaigns: Iterable[Campaign], stream: TextIO) -> None:
    campaigns = list(campaigns)
    k = len(campaigns[0].ads[0].features)
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["campaign_id", "ad_id", "bid_price", "click"] + [f"f{i}" for i in range(k)])
    for c in campaigns:
        for a in c.ads:
            w.writerow([c.index, a.id, repr(a.true_bid_price), a.true_click] + [repr(v) for v in a.features])


def ingest_campaign_csv(stream: TextIO, roi_fraction: float = 0.9) -> list:
    """Read campaigns grouped by ``campaign_id`` in first-appearance order.

    Thresholds are ``roi_fraction`` times each campaign's benchmark ROI.
    """
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise CampaignFormatError("line 1: empty file") from None
    fixed = ["campaign_id", "ad_id", "bid_price", "click"]
    if header[:4] != fixed:
        raise CampaignFormatError(f"line 1: header must start with {','.join(fixed)}, got {header[:4]}")
    feats = header[4:]
    if not feats or feats != [f"f{i}" for i in range(len(feats))]:
        raise CampaignFormatError("line 1: feature columns must be f0..fK")

    groups: dict[str, list] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise CampaignFormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        cid, aid, price, click = (s.strip() for s in row[:4])
        try:
            price_v = float(price)
            fv = tuple(float(v) for v in row[4:])
        except ValueError as exc:
            raise CampaignFormatError(f"line {lineno}: {exc}") from None
        if click not in ("0", "1"):
            raise CampaignFormatError(f"line {lineno}: click must be 0 or 1, got {click!r}")
        try:
            ad = Ad(aid, fv, price_v, int(click))
        except ValueError as exc:
            raise CampaignFormatError(f"line {lineno}: {exc}") from None
        groups.setdefault(cid, []).append(ad)

    campaigns = []
    for cid, ads in groups.items():
        try:
            campaigns.append(Campaign(cid, tuple(ads), _threshold(ads, roi_fraction)))
        except ValueError as exc:
            raise CampaignFormatError(f"campaign {cid}: {exc}") from None
    return campaigns


# -- problem pieces ---------------------------------------------------------


def click_threshold(mean_click: float, threshold: float) -> int:
    return int(mean_click >= threshold)


def bid_objective(x, mu_click, mu_price, sd_click, sd_price, z: float, c: float = 1.0) -> float:
    """Click cost plus distance to the predicted prices minus the exploration bonus."""
    x = np.asarray(x, dtype=float)
    mu_click, mu_price = np.asarray(mu_click, float), np.asarray(mu_price, float)
    if not x.shape == mu_click.shape == mu_price.shape:
        raise ValueError("bid vector and predictions must have the same length")
    bonus = np.sum(sd_click) + np.sum(sd_price)
    return float(c * np.sum(x * mu_click) + np.sum(np.abs(x - mu_price)) - z * bonus)


def roi_constraint(x, mu_click, sd_click, beta_t: float, h: float) -> float:
    """``h - pessimistic clicks / spend``; ``inf`` (infeasible) at zero spend."""
    spend = float(np.sum(x))
    if spend <= 0:
        log.debug("ROI undefined at zero spend")
        return float("inf")
    return h - float(np.sum(np.asarray(mu_click) - beta_t * np.asarray(sd_click))) / spend


def budget_constraint(x, m: int) -> float:
    return float(np.sum(x)) - BUDGET_PER_AD * m


# -- the loop ---------------------------------------------------------------


@dataclass(frozen=True)
class CampaignResult:
    campaign_id: str
    bids: tuple
    spend: float
    budget: float
    realized_roi: float
    threshold: float
    n_positive_bids: int
    z: float
    beta: float
    status: str
    safety_hold: bool
    predicted_price_sum: float
    predicted_clicks: int
    benchmark_mean_bid: float

    def row(self) -> list:
        return [self.campaign_id, self.spend, self.budget, self.realized_roi, self.threshold, self.n_positive_bids, self.z]


@dataclass
class BidState:
    config: BidConfig
    price_data: list
    click_data: list
    params: ConfidenceParams
    results: list
    rng: np.random.Generator
    solver: SolverSettings

    @property
    def feedback_size(self) -> int:
        return len(self.price_data)


def _click_input(config: BidConfig, feats, bids) -> np.ndarray:
    F = np.asarray(feats, dtype=float)[..., : config.click_dims]
    if config.click_input == "features":
        return F
    b = np.asarray(bids, dtype=float)[..., None] / config.bid_scale
    return np.concatenate([F, b], axis=-1)


def init_bid_state(config: BidConfig, seed_ads: list, seed: int = 0) -> BidState:
    """Feedback starts from ``seed_ads`` observed at their benchmark bids."""
    if not seed_ads:
        raise ValueError("the safe seed set must be nonempty")
    streams = split_seed(seed)
    rng = streams["noise"]
    feats = np.array([a.features for a in seed_ads])
    prices = np.array([a.true_bid_price for a in seed_ads])
    clicks = np.array([a.true_click for a in seed_ads], dtype=float)
    y_price = prices + config.price_noise_std * rng.standard_normal(len(seed_ads))
    y_click = clicks + config.click_noise_std * rng.standard_normal(len(seed_ads))
    Xc = _click_input(config, feats, prices)
    price_data = [Observation.of(f, y) for f, y in zip(feats, y_price)]
    click_data = [Observation.of(f, y) for f, y in zip(Xc, y_click)]
    if config.rkhs_bound is not None:
        B = config.rkhs_bound
    else:
        B = max(
            10.0 * np.max(np.abs(y_price)) / np.sqrt(config.price_kernel.signal_variance),
            10.0 * np.max(np.abs(y_click)) / np.sqrt(config.click_kernel.signal_variance),
        )
    R = max(config.price_noise_std, config.click_noise_std)
    params = ConfidenceParams(B, R, config.failure_prob, 0.0, config.beta_override)
    return BidState(config, price_data, click_data, params, [], rng, replace(config.solver, seed=streams["solver_seed"]))


def exploration_gate(results: list) -> bool:
    """Open after two consecutive accepted campaigns that spent less than the
    predicted price sum and met their ROI threshold."""
    if len(results) < 2:
        return False
    return all(
        not r.safety_hold and r.spend < r.predicted_price_sum and r.realized_roi >= r.threshold
        for r in results[-2:]
    )


def build_bid_problem(campaign: Campaign, price_model, click_model, config: BidConfig, z: float, beta_t: float):
    feats = campaign.features
    m = campaign.m
    mu_p, sd_p = price_model.predict(feats)
    c = config.click_cost
    h = campaign.roi_threshold

    if config.click_input == "features":
        mu_c, sd_c = click_model.predict(_click_input(config, feats, np.zeros(m)))

        def clicks(P):
            k = P.shape[0]
            return np.broadcast_to(mu_c, (k, m)), np.broadcast_to(sd_c, (k, m))

    else:
        cache = {}

        def clicks(P):
            key = P.tobytes()
            if key not in cache:
                Q = _click_input(config, np.broadcast_to(feats, P.shape + feats.shape[1:]), P)
                mu, sd = click_model.predict(Q.reshape(-1, Q.shape[-1]))
                cache.clear()
                cache[key] = (mu.reshape(P.shape), sd.reshape(P.shape))
            return cache[key]

    def objective(P):
        mc, sc = clicks(P)
        bonus = sc.sum(axis=1) + sd_p.sum()
        return c * np.sum(P * mc, axis=1) + np.sum(np.abs(P - mu_p), axis=1) - z * bonus

    def roi(P):
        # linear form of h - pessimistic/spend <= 0, valid for positive spend
        mc, sc = clicks(P)
        return h * P.sum(axis=1) - np.sum(mc - beta_t * sc, axis=1)

    def budget(P):
        return P.sum(axis=1) - campaign.budget

    bounds = np.tile([0.0, campaign.budget], (m, 1))
    problem = DecisionProblem(bounds, objective, [roi, budget], vectorized=True)
    return problem, mu_p, sd_p, clicks


def bid_campaign_step(state: BidState, campaign: Campaign) -> tuple[np.ndarray, BidState]:
    """Bid on one campaign, observe feedback for positive bids, record the result.

    An infeasible campaign is skipped: no bids, no feedback, a safety-hold
    record.
    """
    config = state.config
    price_model = gp_condition(config.price_kernel, config.price_noise_std**2, state.price_data)
    click_model = gp_condition(config.click_kernel, config.click_noise_std**2, state.click_data)
    params = state.params.with_gamma(max(model_gain(price_model), model_gain(click_model)))
    beta_t = beta(params)
    z = config.zeta if exploration_gate(state.results) else 0.0

    problem, mu_p, _, clicks = build_bid_problem(campaign, price_model, click_model, config, z, beta_t)
    start = problem.project(mu_p)
    result = minimize(problem, start, state.solver)
    hold = result.status is SolveStatus.INFEASIBLE
    x = np.zeros(campaign.m) if hold else result.point
    if hold:
        log.info("campaign %s: no feasible bids, skipped", campaign.index)

    mc, _ = clicks(x.reshape(1, -1))
    positive = x > 0
    spend = float(x.sum())
    # recorded clicks do not depend on the counterfactual bid
    realized = float(campaign.clicks.sum()) / spend if spend > 0 else float("nan")

    feats = campaign.features
    n_pos = int(positive.sum())
    y_price = campaign.benchmark_bids[positive] + config.price_noise_std * state.rng.standard_normal(n_pos)
    y_click = campaign.clicks[positive] + config.click_noise_std * state.rng.standard_normal(n_pos)
    Xc = _click_input(config, feats[positive], x[positive])
    state.price_data.extend(Observation.of(f, y) for f, y in zip(feats[positive], y_price))
    state.click_data.extend(Observation.of(f, y) for f, y in zip(Xc, y_click))

    state.results.append(
        CampaignResult(
            campaign_id=campaign.index,
            bids=tuple(float(v) for v in x),
            spend=spend,
            budget=campaign.budget,
            realized_roi=realized,
            threshold=campaign.roi_threshold,
            n_positive_bids=n_pos,
            z=float(z),
            beta=float(beta_t),
            status="safety_hold" if hold else result.status.value,
            safety_hold=hold,
            predicted_price_sum=float(mu_p.sum()),
            predicted_clicks=sum(click_threshold(v, config.click_cutoff) for v in mc[0]),
            benchmark_mean_bid=float(campaign.benchmark_bids.mean()),
        )
    )
    state.params = params
    return x, state


def run_bid_campaigns(campaigns: list, seed_ads: list, config: BidConfig | None = None, seed: int = 0) -> BidState:
    config = config or BidConfig()
    state = init_bid_state(config, seed_ads, seed)
    for campaign in campaigns:
        bid_campaign_step(state, campaign)
    return state


def write_results_csv(results: Iterable[CampaignResult], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for r in results:
        w.writerow([r.campaign_id, format(r.spend, ".17g"), format(r.budget, ".17g"),
                    format(r.realized_roi, ".17g"), format(r.threshold, ".17g"), r.n_positive_bids,
                    format(r.z, ".17g")])
