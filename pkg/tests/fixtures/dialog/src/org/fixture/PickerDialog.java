package org.fixture;

import android.app.Dialog;
import android.app.DialogFragment;
import android.os.Bundle;

public class PickerDialog extends DialogFragment {
    @Override
    public Dialog onCreateDialog(Bundle savedInstanceState) {
        return new Dialog(getActivity());
    }
}
