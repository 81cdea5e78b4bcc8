import dataclasses
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1]))

import validate_formulas  # noqa: E402


class TestValidateFormulas:
    def test_all_pass(self, capsys):
        assert validate_formulas.validate_formulas(6, (0.05, 0.3))
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert "  (6,3): OK" in out

    def test_failing_strategy_not_reported_ok(self, monkeypatch, capsys):
        real = validate_formulas.cost

        def skewed(s, p):
            report = real(s, p)
            if s.pools == (4, 2) and p == 0.3:
                return dataclasses.replace(report, cost=report.cost + 1e-3)
            return report

        monkeypatch.setattr(validate_formulas, "cost", skewed)
        assert not validate_formulas.validate_formulas(4, (0.05, 0.3, 0.5))
        lines = capsys.readouterr().out.splitlines()
        assert "  (4,2) p=0.3: FAIL" in "\n".join(lines)
        assert "  (4,2): OK" not in lines
        assert "  (4): OK" in lines
