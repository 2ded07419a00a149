"""Quality-diversity schedulers behind a common ``step()`` interface."""
from .base import (AlgoConfig, BudgetPlan, CmaMegaConfig, Evaluator, IterationReport,
                   MapElitesConfig, MeEsConfig, PgaMeConfig, Rngs, plan_budget)
from .cma_mega import CmaMega, CmaMegaState, cma_mega_iteration, init_cma_mega
from .map_elites import MapElites, map_elites_iteration
from .me_es import (EMPTY_NOVELTY, MeEs, MeEsState, NoveltyStore, init_me_es, me_es_iteration,
                    novelty)
from .pga_me import (PgaMe, iso_line_variation, pga_me_iteration, pg_variation,
                     pg_variation_batch, variation_batch)

SCHEDULERS = {
    "cma_mega": CmaMega,
    "map_elites": MapElites,
    "pga_me": PgaMe,
    "me_es": MeEs,
}


def make_scheduler(env, archive, cfg: AlgoConfig, rngs: Rngs, evaluator: Evaluator):
    return SCHEDULERS[cfg.algorithm](env, archive, cfg, rngs, evaluator)


__all__ = [
    "AlgoConfig", "BudgetPlan", "CmaMegaConfig", "MapElitesConfig", "MeEsConfig", "PgaMeConfig",
    "Evaluator", "IterationReport", "Rngs", "plan_budget",
    "CmaMega", "CmaMegaState", "cma_mega_iteration", "init_cma_mega",
    "MapElites", "map_elites_iteration",
    "MeEs", "MeEsState", "NoveltyStore", "EMPTY_NOVELTY", "init_me_es", "me_es_iteration",
    "novelty",
    "PgaMe", "iso_line_variation", "pga_me_iteration", "pg_variation", "pg_variation_batch",
    "variation_batch",
    "SCHEDULERS", "make_scheduler",
]
