"""
Experiment Service for the MTS Domain Adaptation toolkit
Seeded end-to-end runs, serially or in a process pool
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from mts.config import dump_run_config
from mts.models.trained_model import MTS
from mts.repositories.checkpoint_repository import checkpoint_repository
from mts.repositories.run_repository import (CHECKPOINT_FILE, CONFIG_FILE, HISTORY_FILE, REPORT_FILE,
                                             run_repository)
from mts.services.data_service import data_service
from mts.services.eval_service import eval_service
from mts.services.trainer_service import trainer_service

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Job:
    """One seeded training run and where its files go"""

    config: object
    ablation: str
    out_dir: str
    rotation: float = None


def apply_inference(model, config):
    """Copy the configured test-time rule onto an MTS model"""
    if model.kind == MTS:
        model.inference = config.inference
        model.similarity_threshold = config.similarity_threshold
    return model


def run_job(job):
    """
    Generate data, train, evaluate on the target and write the run files

    Args:
        job (Job): Run description

    Returns:
        EvalReport: Final target evaluation
    """
    config = job.config
    if job.rotation is not None:
        config = config.with_overrides(rotation_deg=float(job.rotation))
    source, target = data_service.generate(config.shift_config())
    hp = config.hyperparams(job.ablation)
    run_repository.ensure_dir(job.out_dir)
    run_repository.write_text(os.path.join(job.out_dir, CONFIG_FILE),
                              dump_run_config(config.with_overrides(ablation=job.ablation, out_dir=job.out_dir)))
    model, history = trainer_service.train(source, target, hp)
    apply_inference(model, config)
    report = eval_service.evaluate(model, target)
    run_repository.write_history(os.path.join(job.out_dir, HISTORY_FILE), history)
    run_repository.write_report(os.path.join(job.out_dir, REPORT_FILE), report)
    checkpoint_repository.save(model, os.path.join(job.out_dir, CHECKPOINT_FILE))
    logger.info(f"Run {job.ablation} seed {config.seed} rotation {config.rotation_deg}: OS={report.os:.4f}")
    return report


class ExperimentService:
    """
    Service to execute batches of independent runs
    """

    def seeds(self, config):
        """Consecutive seeds starting at config.seed"""
        return [config.seed + offset for offset in range(config.seeds)]

    def run_all(self, jobs, workers=1):
        """
        Execute jobs and return their reports in job order

        Args:
            jobs (list): Jobs to run
            workers (int): Process count; 1 runs serially in this process

        Returns:
            list: EvalReports aligned with jobs
        """
        jobs = list(jobs)
        if workers <= 1 or len(jobs) <= 1:
            return [run_job(job) for job in jobs]
        logger.info(f"Running {len(jobs)} jobs on {workers} worker processes")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_job, jobs))


# Singleton instance
experiment_service = ExperimentService()
