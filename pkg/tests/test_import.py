"""Import Test."""

import importlib
import inspect
import pkgutil

import bandgp


def _modules():
    prefix = "{}.".format(bandgp.__name__)
    iter_packages = pkgutil.walk_packages(
        bandgp.__path__,
        prefix,
    )
    for _, name, _ in iter_packages:
        module_name = name if name.startswith(prefix) else prefix + name
        yield importlib.import_module(module_name)


def _is_public(name: str) -> bool:
    return not name.startswith("_") or (name.startswith("__") and name.endswith("__"))


def test_imports():
    """Test import modules."""
    assert list(_modules())


def test_public_api_is_documented():
    """Every public function, class and method written in the package carries a docstring."""
    missing = []
    for module in _modules():
        source = inspect.getsourcefile(module)
        for name, obj in vars(module).items():
            if name.startswith("_") or getattr(obj, "__module__", None) != module.__name__:
                continue
            if not (inspect.isfunction(obj) or inspect.isclass(obj)):
                continue
            if not inspect.getdoc(obj):
                missing.append(f"{module.__name__}.{name}")
            if not inspect.isclass(obj):
                continue
            for attr, member in vars(obj).items():
                func = member.fget if isinstance(member, property) else getattr(member, "__func__", member)
                if not (_is_public(attr) and inspect.isfunction(func)):
                    continue
                try:
                    written_here = inspect.getsourcefile(func) == source
                except TypeError:
                    written_here = False
                if written_here and not func.__doc__:
                    missing.append(f"{module.__name__}.{name}.{attr}")
    assert missing == []
