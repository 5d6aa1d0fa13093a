from .accounting import (
    AdvEdOdometer, Decision, EdCost, EdFilter, EdOdometer, EpsCost,
    EpsOdometer, RenyiCost, RenyiDP, RenyiFilter, RenyiOdometer,
    active_accountants, charge, charge_advanced_ed, charge_sequential_ed,
    conv_renyi, ed_filter, ed_odo, filter_check, renyi_filter, renyi_odo,
    renyi_to_ed,
)
from .mechanisms import (
    exponential, gauss, gauss_sigma, gauss_vec, laplace, renyi_gauss,
    renyi_gauss_vec, renyi_sigma, seed, svt,
)
