"""Best-arm identification: reductions from fixed confidence to fixed budget and anytime."""

__version__ = "0.1.0"

from .confidence import LogConfidence
from .env import (BanditInstance, GaussianArm, RandomStream, Sampler, best_arm,
                  make_adversarial_shvar_instance, make_figure_instance, sample_reward)
from .exceptions import InfeasibleInstanceError, InvalidInstanceError, ProtocolError, UsageError
from .fb import (FC2FB, SHVar, FBOutcome, SequentialHalving, UniformAllocation, fc2fb_as_fb,
                 sh_run, shvar_run, uniform_fb_run)
from .fc import (FCSession, PEKHNFactory, PEKHNSession, Running, ScriptedFactory, Stopped,
                 pekhn_session, scripted_session)
from .reductions import (AnytimeTrace, FCW2SFactory, FCW2SSession, fc2at_run, fc2fb_run,
                         fc2fb_schedule, fcw2s_required_trials, fcw2s_run, naive_fc2fb)

__all__ = [
    "LogConfidence", "BanditInstance", "GaussianArm", "RandomStream", "Sampler", "best_arm",
    "make_adversarial_shvar_instance", "make_figure_instance", "sample_reward",
    "InfeasibleInstanceError", "InvalidInstanceError", "ProtocolError", "UsageError",
    "FC2FB", "SHVar", "FBOutcome", "SequentialHalving", "UniformAllocation", "fc2fb_as_fb",
    "sh_run", "shvar_run", "uniform_fb_run",
    "FCSession", "PEKHNFactory", "PEKHNSession", "Running", "ScriptedFactory", "Stopped",
    "pekhn_session", "scripted_session",
    "AnytimeTrace", "FCW2SFactory", "FCW2SSession", "fc2at_run", "fc2fb_run", "fc2fb_schedule",
    "fcw2s_required_trials", "fcw2s_run", "naive_fc2fb",
]
