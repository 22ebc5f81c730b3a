# coding: utf-8
import logging

from laboratory.management.commands._base import LabCommand, tqdm
from laboratory.operators import assemble_operator, build_grid
from laboratory.pseudospectral import pseudo_abscissa
from laboratory.reports import plot as plot_svg
from laboratory.reports import write_csv
from laboratory.semigroup import (
    decay_grid,
    disc_decay,
    disc_physical_decay,
    heat_mode_rate,
    operator_norm_trace,
    slowest_decay,
    wei_bound_check,
    with_fit,
)

logger = logging.getLogger(__name__)

SUMMARY_FIELDS = (
    "nu",
    "k",
    "ell",
    "kind",
    "psi",
    "rate",
    "prefactor",
    "residual",
    "window_start",
    "window_end",
    "wei_excess",
    "constant",
)


class Command(LabCommand):
    help = "Decay of the semigroup generated by the mode operators"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--worst", action="store_true", help="Also trace the operator norm of the semigroup")

    def run(self, config, directory, jobs=1, plot=False, **options):
        profile = config.profile()
        modes = [(ell, ell) for ell in config.ells] if config.mode == "disc" else [(config.k, config.ell)]
        traces, summary = [], []
        for nu in tqdm(config.nu_list, desc="Decay"):
            horizons = []
            for k, ell in modes:
                op = assemble_operator(build_grid(profile.radius, config.grid_size, ell), profile, nu, k, ell)
                psi = pseudo_abscissa(op, grid_count=config.lambda_samples, value_range=profile.value_range()).psi
                t_grid = decay_grid(psi, config.time_samples)
                horizons.append(t_grid)
                if config.mode == "disc":
                    trace = disc_decay(
                        profile,
                        nu,
                        ell,
                        t_grid,
                        grid_size=config.grid_size,
                        count=config.random_samples,
                        seed=config.seed,
                    )
                else:
                    trace, _ = slowest_decay(
                        op, t_grid, count=config.random_samples, seed=config.seed, window=config.fit_window
                    )
                kinds = [("random", trace)]
                if options.get("worst"):
                    kinds.append(("operator", with_fit(operator_norm_trace(op, t_grid), window=config.fit_window)))
                for kind, item in kinds:
                    traces.append((nu, k, ell, kind, item))
                    summary.append(
                        dict(
                            nu=nu,
                            k=k,
                            ell=ell,
                            kind=kind,
                            psi=psi,
                            rate=item.fit_rate,
                            prefactor=item.fit_prefactor,
                            residual=item.fit_residual,
                            window_start=item.window[0],
                            window_end=item.window[1],
                            wei_excess=wei_bound_check(item, psi),
                        )
                    )
                logger.info(f"nu={nu:g}, k={k:g}, ell={ell}: rate={trace.fit_rate:.6g}, Psi={psi:.6g}")
            if config.mode == "disc":
                # The slowest angular mode sets the horizon of the summed decay
                longest = max(horizons, key=lambda times: times[-1])
                physical, constant = disc_physical_decay(
                    profile, nu, config.ells, longest, grid_size=config.grid_size, seed=config.seed
                )
                traces.append((nu, "", "", "disc", physical))
                summary.append(
                    dict(
                        nu=nu,
                        kind="disc",
                        rate=physical.fit_rate,
                        prefactor=physical.fit_prefactor,
                        constant=constant,
                        residual=physical.fit_residual,
                        window_start=physical.window[0],
                        window_end=physical.window[1],
                    )
                )
                # Mean-free ell=0 data are not mixed and decay at the heat rate only
                heat = heat_mode_rate(build_grid(profile.radius, config.grid_size, 0), nu)
                summary.append(dict(nu=nu, ell=0, kind="heat", rate=heat, constant=heat / nu))
                logger.info(f"nu={nu:g}: disc rate={physical.fit_rate:.6g}, heat rate={heat:.6g}")
        write_csv(
            self.path(directory, "decay.csv"),
            ("nu", "k", "ell", "kind", "t", "norm"),
            (dict(nu=nu, k=k, ell=ell, kind=kind, **row) for nu, k, ell, kind, trace in traces for row in trace.rows()),
        )
        write_csv(self.path(directory, "decay_summary.csv"), SUMMARY_FIELDS, summary)
        if plot:
            plot_svg(
                self.path(directory, "decay.svg"),
                [
                    (trace.times, trace.norms / trace.norms[0], f"nu={nu:g} k={k} ell={ell} {kind}")
                    for nu, k, ell, kind, trace in traces
                ],
                xlabel="t",
                ylabel="|g(t)| / |g(0)|",
            )
